"""Average-cost optimality through the vanishing-discount limit.

The discounted values V_beta grow like l / (1 - beta) as beta approaches
1; the limit constant and a relative value function are recovered from a
sweep over an increasing beta grid:

    l_hat = (1 - beta) * min_x V_beta(x)   at the largest grid point,
    h     = elementwise min over a tail window of V_beta - min_x V_beta.

The pair must satisfy the average-cost optimality inequality

    h(x) + l_hat >= min_a [ gamma * c(x,a) + log sum_y q(y|x,a) * exp(h(y)) ]

whenever the relative values stay bounded in beta; the residual of that
inequality, the minimizing selector, and an independent growth-rate
evaluation of any policy's risk-sensitive average cost are all provided
here.  l_hat / gamma is the optimal average cost, and the selector
attains it, exactly when the verification checks pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from ._kernels import policy_recursion
from .bellman import (
    DiscountedSolution,
    LogValueFunction,
    SolverConvergenceError,
    minimizing_backup,
    solve_untruncated,
)
from .entropy import log_mgf_rows
from .model import (
    FiniteMDP,
    StationaryPolicy,
    candidate_policies,
    require_policy,
)

__all__ = [
    "default_beta_grid",
    "SweepEntry",
    "DiscountSweepResult",
    "discount_sweep",
    "AverageConstant",
    "estimate_average_constant",
    "relative_value",
    "optimality_residual",
    "PolicyRiskEvaluation",
    "evaluate_policy_risk",
    "GrowthRateEstimate",
    "growth_rate",
    "AverageSolution",
    "solve_average",
    "VerificationReport",
    "verify_optimality",
]


def default_beta_grid(start: float = 0.9, count: int = 13) -> np.ndarray:
    """Geometric approach to 1: 1 - (1 - start) / 2**k for k < count."""
    if not (0.0 < start < 1.0):
        raise ValueError("grid start must lie in (0, 1)")
    if count < 1:
        raise ValueError("count must be >= 1")
    return 1.0 - (1.0 - start) * 0.5 ** np.arange(count)


# ---------------------------------------------------------------------------
# the sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepEntry:
    beta: float
    value: LogValueFunction | None
    m_beta: float
    h_beta: np.ndarray | None
    scaled: float
    policy: StationaryPolicy | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class DiscountSweepResult:
    gamma: float
    entries: tuple[SweepEntry, ...]

    def successful(self) -> list[SweepEntry]:
        return [e for e in self.entries if e.ok]

    @property
    def betas(self) -> np.ndarray:
        return np.array([e.beta for e in self.entries])


def discount_sweep(
    model: FiniteMDP,
    gamma: float,
    betas: Sequence[float] | None = None,
    tol: float = 1e-10,
) -> DiscountSweepResult:
    """Solve the untruncated equation along an increasing beta grid.

    Each solve warm-starts from the previous value (a valid lower bound,
    since the fixed points are nondecreasing in beta).  A failed beta is
    recorded with its error and the sweep continues.
    """
    grid = default_beta_grid() if betas is None else np.asarray(betas, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("beta grid must be a nonempty 1-D sequence")
    if np.any(grid <= 0.0) or np.any(grid >= 1.0) or np.any(np.diff(grid) <= 0.0):
        raise ValueError("beta grid must be strictly increasing inside (0, 1)")
    entries: list[SweepEntry] = []
    start = None
    for beta in grid:
        try:
            sol = solve_untruncated(model, float(beta), gamma, tol=tol, start=start)
        except SolverConvergenceError as exc:
            entries.append(
                SweepEntry(float(beta), None, math.nan, None, math.nan, None, str(exc))
            )
            continue
        start = sol.value.values
        v = sol.value.values
        m_beta = float(v.min())
        entries.append(
            SweepEntry(
                beta=float(beta),
                value=sol.value,
                m_beta=m_beta,
                h_beta=v - m_beta,
                scaled=(1.0 - float(beta)) * m_beta,
                policy=sol.policy,
            )
        )
    return DiscountSweepResult(gamma=float(gamma), entries=tuple(entries))


class AverageConstant(NamedTuple):
    l_hat: float
    diagnostic: float


def estimate_average_constant(sweep: DiscountSweepResult) -> AverageConstant:
    """Scaled minimum value at the largest beta, with a Cauchy diagnostic.

    The diagnostic is the largest pairwise difference of the scaled
    values over the last three successful entries; small values certify
    the limit at the grid's resolution.  No extrapolation is attempted.
    """
    good = sweep.successful()
    if len(good) < 3:
        raise ValueError(f"need at least 3 successful sweep entries, got {len(good)}")
    tail = [e.scaled for e in good[-3:]]
    diag = max(abs(a - b) for a in tail for b in tail)
    return AverageConstant(l_hat=good[-1].scaled, diagnostic=diag)


def relative_value(sweep: DiscountSweepResult, tail: int) -> np.ndarray:
    """Elementwise minimum of h_beta over the last ``tail`` entries,
    re-anchored so the smallest component is 0.

    The tail-minimum is a conservative finite-grid stand-in for the
    limit-inferior that defines the relative value function.
    """
    good = sweep.successful()
    if not (1 <= tail <= len(good)):
        raise ValueError(f"tail must lie in [1, {len(good)}], got {tail}")
    h = np.min(np.vstack([e.h_beta for e in good[-tail:]]), axis=0)
    return h - h.min()


# ---------------------------------------------------------------------------
# optimality inequality
# ---------------------------------------------------------------------------


def optimality_residual(
    model: FiniteMDP, gamma: float, h: np.ndarray, l_hat: float
) -> tuple[np.ndarray, StationaryPolicy]:
    """Per-state slack of the optimality inequality at (h, l_hat).

    residual(x) = h(x) + l_hat - min_a [gamma c(x,a) + log_mgf(h, q(.|x,a))].
    Nonnegative residuals mean the inequality holds; the absolute value
    doubles as the residual of the corresponding optimality equation.
    The returned policy is the per-state minimizer (lowest index on ties).
    """
    h = np.asarray(h, dtype=float)
    if h.shape != (model.n_states,):
        raise ValueError(f"h must have shape ({model.n_states},)")
    if not np.all(np.isfinite(h)):
        raise ValueError("h must be finite")
    _, cost, _ = model.flat
    rhs, policy = minimizing_backup(model, h, gamma * cost)
    return h + l_hat - rhs, policy


def _refine_relative_value(
    model: FiniteMDP,
    gamma: float,
    h0: np.ndarray,
    tol: float,
    cap: int,
) -> tuple[np.ndarray, bool, int]:
    """Anchored fixed-point polish of h under the undiscounted backup.

    Iterates h <- G(h) - min_x G(h) with G the gamma-scaled minimizing
    backup at discount 1.  On models whose relative values stay bounded
    this converges geometrically (span contraction of the tilted
    dynamics) and removes the O(1 - beta_max) bias of the grid proxy;
    when the relative values diverge, the iteration drifts upward and is
    cut off at ``cap``, reported as unrefined.
    """
    _, cost, _ = model.flat
    gc = gamma * cost
    h = h0 - h0.min()
    for it in range(1, cap + 1):
        new, _ = minimizing_backup(model, h, gc)
        new -= new.min()
        step = float(np.abs(new - h).max())
        h = new
        if step <= tol:
            return h, True, it
    return h, False, cap


@dataclass(frozen=True)
class AverageSolution:
    """Average-cost solution candidate extracted from a discount sweep."""

    l_hat: float
    diagnostic: float
    h: np.ndarray
    policy: StationaryPolicy
    inequality_residual: np.ndarray
    equation_residual: np.ndarray
    refined: bool
    sweep: DiscountSweepResult


def solve_average(
    model: FiniteMDP,
    gamma: float,
    betas: Sequence[float] | None = None,
    tol: float = 1e-10,
    tail: int = 4,
    refine: bool = True,
    refine_tol: float = 1e-12,
    refine_cap: int = 10_000,
    sweep: DiscountSweepResult | None = None,
) -> AverageSolution:
    """Sweep, estimate the constant, build h, and evaluate the inequality.

    The raw tail-minimum h carries an O(1 - beta_max) bias that shows up
    as a spurious negative residual; by default it is polished by the
    anchored undiscounted iteration before the residual is evaluated.
    Models with diverging relative values leave the polish unconverged,
    in which case the grid h is kept and ``refined`` is False.
    """
    if sweep is None:
        sweep = discount_sweep(model, gamma, betas=betas, tol=tol)
    l_hat, diagnostic = estimate_average_constant(sweep)
    h = relative_value(sweep, min(tail, len(sweep.successful())))
    refined = False
    if refine:
        polished, converged, _ = _refine_relative_value(
            model, gamma, h, refine_tol, refine_cap
        )
        if converged:
            h = polished
            refined = True
    residual, policy = optimality_residual(model, gamma, h, l_hat)
    return AverageSolution(
        l_hat=l_hat,
        diagnostic=diagnostic,
        h=h,
        policy=policy,
        inequality_residual=residual,
        equation_residual=np.abs(residual),
        refined=refined,
        sweep=sweep,
    )


# ---------------------------------------------------------------------------
# policy evaluation in the log domain
# ---------------------------------------------------------------------------

_WINDOW = 10  # trailing steps over which the growth estimate is checked


@dataclass(frozen=True)
class PolicyRiskEvaluation:
    """Exact finite-horizon log-MGF of cumulative cost under a fixed policy.

    ``j_n[x]`` is log E_x exp(gamma * sum of the first ``horizon`` costs);
    ``growth`` is the last difference quotient divided by gamma, and
    ``deviation`` the largest disagreement of that quotient over the
    trailing window (infinite when the horizon is too short to check).
    """

    j_n: np.ndarray
    growth: np.ndarray
    deviation: float
    horizon: int


def _recursion_setup(
    model: FiniteMDP, policy: StationaryPolicy, gamma: float
) -> tuple[np.ndarray, np.ndarray]:
    require_policy(model, policy)
    c, rows = model.policy_arrays(policy)
    return gamma * c, rows


def _advance(gc: np.ndarray, rows: np.ndarray, u: np.ndarray, steps: int) -> np.ndarray:
    if steps <= 0:
        return u
    return policy_recursion(u, gc, rows, steps)


def _tail_diffs(
    gc: np.ndarray, rows: np.ndarray, u: np.ndarray, steps: int
) -> tuple[np.ndarray, list[np.ndarray]]:
    diffs = []
    for _ in range(steps):
        nxt = gc + log_mgf_rows(u, rows)
        diffs.append(nxt - u)
        u = nxt
    return u, diffs


def evaluate_policy_risk(
    model: FiniteMDP, policy: StationaryPolicy, gamma: float, horizon: int
) -> PolicyRiskEvaluation:
    """Backward log-domain recursion u <- gamma*c_f + log_mgf(u, q_f)."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    gc, rows = _recursion_setup(model, policy, gamma)
    tail = min(horizon, _WINDOW + 1)
    u = _advance(gc, rows, np.zeros(model.n_states), horizon - tail)
    u, diffs = _tail_diffs(gc, rows, u, tail)
    growth = diffs[-1] / gamma
    if len(diffs) >= 2:
        deviation = max(
            float(np.abs(d / gamma - growth).max()) for d in diffs[:-1]
        )
    else:
        deviation = math.inf
    return PolicyRiskEvaluation(j_n=u, growth=growth, deviation=deviation, horizon=horizon)


@dataclass(frozen=True)
class GrowthRateEstimate:
    rate: np.ndarray
    horizon: int
    deviation: float


def growth_rate(
    model: FiniteMDP,
    policy: StationaryPolicy,
    gamma: float,
    dev_tol: float = 1e-9,
    max_horizon: int = 2**16,
    min_horizon: int = 64,
) -> GrowthRateEstimate:
    """Difference-quotient growth rate with horizon doubling.

    The horizon doubles from ``min_horizon`` until the difference
    quotient is flat over the trailing window within ``dev_tol`` or the
    cap is reached; reducible chains settle to state-dependent rates.
    """
    gc, rows = _recursion_setup(model, policy, gamma)
    u = np.zeros(model.n_states)
    n = 0
    target = min_horizon
    while True:
        u = _advance(gc, rows, u, target - n - _WINDOW)
        u, diffs = _tail_diffs(gc, rows, u, min(_WINDOW, target - max(n, 0)))
        n = target
        growth = diffs[-1] / gamma
        deviation = max(float(np.abs(d / gamma - growth).max()) for d in diffs[:-1])
        if deviation <= dev_tol or target >= max_horizon:
            return GrowthRateEstimate(rate=growth, horizon=n, deviation=deviation)
        target = min(2 * target, max_horizon)


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of the three average-optimality checks.

    (a) the optimality inequality holds within tolerance,
    (b) the extracted selector's growth rate matches l_hat / gamma,
    (c) no candidate policy beats l_hat / gamma.
    Failures are reported, never raised.
    """

    solution: AverageSolution
    rate: np.ndarray
    rate_deviation: float
    residual_ok: bool
    rate_ok: bool
    sampled_ok: bool
    sampled_exhaustive: bool
    worst_candidate_margin: float
    h_divergence: bool
    state_dependent: bool
    failures: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return self.residual_ok and self.rate_ok and self.sampled_ok


def _trend_indicator(sweep: DiscountSweepResult) -> np.ndarray:
    """Per-state flag: h_beta strictly increasing with widening increments
    over the last four successful grid points."""
    good = sweep.successful()
    if len(good) < 4:
        return np.zeros(len(good[0].h_beta) if good else 0, dtype=bool)
    h = np.vstack([e.h_beta for e in good[-4:]])
    d = np.diff(h, axis=0)
    return np.all(d > 0.0, axis=0) & np.all(np.diff(d, axis=0) > 0.0, axis=0)


def verify_optimality(
    model: FiniteMDP,
    gamma: float,
    betas: Sequence[float] | None = None,
    solver_tol: float = 1e-10,
    tail: int = 4,
    residual_tol: float = 1e-8,
    rate_tol: float = 1e-6,
    dev_tol: float = 1e-9,
    max_horizon: int = 2**16,
    policy_limit: int = 4096,
    sample_size: int = 256,
    rng: np.random.Generator | None = None,
    refine: bool = True,
    sweep: DiscountSweepResult | None = None,
) -> VerificationReport:
    """Run the sweep and check the full average-optimality story."""
    solution = solve_average(
        model, gamma, betas=betas, tol=solver_tol, tail=tail, refine=refine, sweep=sweep
    )
    target = solution.l_hat / gamma
    failures: list[str] = []

    residual_ok = bool(np.all(solution.inequality_residual >= -residual_tol))
    if not residual_ok:
        worst = int(np.argmin(solution.inequality_residual))
        failures.append(
            f"optimality inequality fails at state {worst} "
            f"(residual {solution.inequality_residual[worst]:.3e})"
        )

    est = growth_rate(
        model, solution.policy, gamma, dev_tol=dev_tol, max_horizon=max_horizon
    )
    gap = np.abs(est.rate - target)
    rate_ok = bool(np.all(gap <= rate_tol))
    if not rate_ok:
        worst = int(np.argmax(gap))
        failures.append(
            f"extracted policy's growth rate at state {worst} is "
            f"{est.rate[worst]:.6g}, not l_hat/gamma = {target:.6g}"
        )

    pool, exhaustive = candidate_policies(
        model, limit=policy_limit, sample=sample_size, rng=rng,
        include=[solution.policy],
    )
    worst_margin = math.inf
    sampled_ok = True
    for candidate in pool:
        cand = growth_rate(model, candidate, gamma, dev_tol=dev_tol,
                           max_horizon=max_horizon)
        margin = float((cand.rate - target).min())
        if margin < worst_margin:
            worst_margin = margin
        if margin < -rate_tol and sampled_ok:
            sampled_ok = False
            failures.append(
                f"policy {candidate.choice} undercuts l_hat/gamma by {-margin:.3e}"
            )

    trend = _trend_indicator(solution.sweep)
    return VerificationReport(
        solution=solution,
        rate=est.rate,
        rate_deviation=est.deviation,
        residual_ok=residual_ok,
        rate_ok=rate_ok,
        sampled_ok=sampled_ok,
        sampled_exhaustive=exhaustive,
        worst_candidate_margin=worst_margin,
        h_divergence=bool(trend.any()),
        state_dependent=bool(est.rate.max() - est.rate.min() > rate_tol),
        failures=tuple(failures),
    )
