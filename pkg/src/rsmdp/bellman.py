"""Discounted risk-sensitive value functions by log-domain fixed-point iteration.

The multiplicative functional equation

    exp(w(x)) = min_a [ exp(gamma * c(x,a)) * sum_y q(y|x,a) * exp(beta * w(y)) ]

is solved in its log form

    w(x) = min_a [ gamma * c(x,a) + log sum_y q(y|x,a) * exp(beta * w(y)) ]

by iterating from w = 0 (or a supplied lower starting point).  The
backup is a beta-contraction in sup norm because the log-sum-exp term is
1-Lipschitz in its argument, so the iteration stops once the a-posteriori
bound (beta / (1 - beta)) * ||w_k - w_{k-1}||_inf reaches the requested
tolerance; the raw step alone wildly understates the error as beta
approaches 1.  Costs may be truncated at a level N before scaling, in
which case the fixed point obeys 0 <= (1 - beta) * w <= N * gamma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import bellman_iterate
from .entropy import log_mgf_rows
from .model import FiniteMDP, StationaryPolicy

__all__ = [
    "LogValueFunction",
    "DiscountedSolution",
    "SolverConvergenceError",
    "bellman_apply",
    "solve_discounted",
    "solve_untruncated",
    "truncation_sweep",
]

# 1 - beta below this is numerically delicate; solutions get flagged.
NEAR_ONE = 1e-6


class SolverConvergenceError(RuntimeError):
    """Iteration cap exceeded; carries the best residual bound reached."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class LogValueFunction:
    """Per-state value vector in the log domain.

    ``truncation`` is the cost ceiling ``N`` used, or None when costs
    entered untruncated.
    """

    values: np.ndarray
    beta: float
    gamma: float
    truncation: int | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class DiscountedSolution:
    value: LogValueFunction
    policy: StationaryPolicy
    iterations: int
    residual: float
    ill_conditioned: bool = False


def _scaled_costs(model: FiniteMDP, gamma: float, truncation: int | None) -> np.ndarray:
    _, cost, _ = model.flat
    if truncation is None:
        return gamma * cost
    return gamma * np.minimum(cost, float(truncation))


def _check_params(beta: float, gamma: float, truncation: int | None) -> None:
    if not (0.0 < beta < 1.0):
        raise ValueError(f"beta must lie in (0, 1), got {beta!r}")
    if not (gamma > 0.0) or not math.isfinite(gamma):
        raise ValueError(f"gamma must be positive and finite, got {gamma!r}")
    if truncation is not None and (int(truncation) != truncation or truncation < 1):
        raise ValueError(f"truncation level must be a positive integer, got {truncation!r}")


def minimizing_backup(
    model: FiniteMDP, argument: np.ndarray, scaled_costs: np.ndarray
) -> tuple[np.ndarray, StationaryPolicy]:
    """min over actions of scaled_costs + log_mgf(argument, row), per state.

    Ties in the minimum go to the lowest admissible action index so that
    the extracted selector is deterministic.
    """
    ptr, _, kern = model.flat
    out = np.empty(model.n_states)
    choice = []
    for x in range(model.n_states):
        lo, hi = int(ptr[x]), int(ptr[x + 1])
        vals = scaled_costs[lo:hi] + log_mgf_rows(argument, kern[lo:hi])
        best = vals.min()
        ties = [model.actions[x][i] for i in np.flatnonzero(vals == best)]
        out[x] = best
        choice.append(min(ties))
    return out, StationaryPolicy(tuple(choice))


def bellman_apply(
    w: np.ndarray,
    model: FiniteMDP,
    beta: float,
    gamma: float,
    truncation: int | None = None,
) -> tuple[np.ndarray, StationaryPolicy]:
    """One application of the discounted minimizing backup to ``w``."""
    _check_params(beta, gamma, truncation)
    w = np.asarray(w, dtype=float)
    if w.shape != (model.n_states,):
        raise ValueError(f"w must have shape ({model.n_states},)")
    return minimizing_backup(model, beta * w, _scaled_costs(model, gamma, truncation))


def _iteration_cap(beta: float, gamma: float, ceiling: float, tol: float) -> int:
    # a-priori geometric budget: beta^k * W0 <= tol * (1 - beta), plus slack
    w0 = gamma * ceiling / (1.0 - beta)
    if w0 <= 0.0:
        return 64
    arg = tol * (1.0 - beta) / w0
    if arg >= 1.0:
        return 64
    return int(math.ceil(math.log(arg) / math.log(beta))) + 64


def solve_discounted(
    model: FiniteMDP,
    beta: float,
    gamma: float,
    truncation: int | None,
    tol: float = 1e-10,
    start: np.ndarray | None = None,
    max_iter: int | None = None,
) -> DiscountedSolution:
    """Fixed point of the truncated-cost backup, to sup-norm error ``tol``.

    ``start`` may supply a warm start from a smaller discount factor or
    truncation level; it must lie below the fixed point for the iterate
    sequence to stay monotone (the default 0 always does).
    """
    _check_params(beta, gamma, truncation)
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    gc = _scaled_costs(model, gamma, truncation)
    ptr, _, kern = model.flat
    w0 = (
        np.zeros(model.n_states)
        if start is None
        else np.array(start, dtype=float).reshape(model.n_states)
    )
    ceiling = model.max_cost if truncation is None else min(model.max_cost, truncation)
    cap = _iteration_cap(beta, gamma, ceiling, tol) if max_iter is None else max_iter
    w, iters, step, converged = bellman_iterate(
        w0, ptr, gc, kern, float(beta), float(tol), cap
    )
    residual = beta / (1.0 - beta) * step
    if not converged:
        raise SolverConvergenceError(
            f"no convergence within {cap} iterations "
            f"(best residual bound {residual:.3e}); tol may be too tight "
            f"for floating point at beta={beta!r}",
            residual,
        )
    _, policy = minimizing_backup(model, beta * w, gc)
    value = LogValueFunction(w, beta=beta, gamma=gamma, truncation=truncation)
    return DiscountedSolution(
        value=value,
        policy=policy,
        iterations=iters,
        residual=residual,
        ill_conditioned=(1.0 - beta) < NEAR_ONE,
    )


def solve_untruncated(
    model: FiniteMDP,
    beta: float,
    gamma: float,
    tol: float = 1e-10,
    start: np.ndarray | None = None,
) -> DiscountedSolution:
    """Solve with the raw costs; exact for finite-cost models.

    Equivalent to truncating at any level at or above the maximum cost,
    so the truncation limit is reached exactly rather than approached.
    """
    _check_params(beta, gamma, None)
    solution = solve_discounted(model, beta, gamma, None, tol=tol, start=start)
    return solution


def truncation_sweep(
    model: FiniteMDP,
    beta: float,
    gamma: float,
    levels,
    tol: float = 1e-10,
) -> list[DiscountedSolution]:
    """Solve for each truncation level in the strictly increasing ``levels``.

    Values are pointwise nondecreasing in the level and freeze once the
    level clears the maximum cost; each solve warm-starts from the
    previous one, which is a valid lower bound by that monotonicity.
    """
    levels = [int(n) for n in levels]
    if any(b <= a for a, b in zip(levels, levels[1:])) or not levels:
        raise ValueError("truncation levels must be nonempty and strictly increasing")
    if levels[0] < 1:
        raise ValueError("truncation levels must be positive")
    out: list[DiscountedSolution] = []
    start = None
    for n in levels:
        sol = solve_discounted(model, beta, gamma, n, tol=tol, start=start)
        start = sol.value.values
        out.append(sol)
    return out
