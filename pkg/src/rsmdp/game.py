"""Entropy-penalized minimax game: opponents, payoffs, and saddle checks.

The opponent plays a stationary stochastic kernel p over next states; the
controller pays gamma * c(x, a) - R(p(.|x,a) || q(.|x,a)) per step and
the chain moves according to p.  Admissible opponents keep every
relative entropy on the policy's support finite and the per-step payoff
bounded below.  The discounted value of this game, at the saddle formed
by the minimizing selector and the exponentially tilted opponent, equals
the discounted risk-sensitive value function, which is what the checks
here verify numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .entropy import as_prob_vector, log_mgf_rows, relative_entropy, tilt
from .model import (
    FiniteMDP,
    RandomizedMarkovPolicy,
    StationaryPolicy,
    require_policy,
)

__all__ = [
    "OpponentKernel",
    "AdmissibilityCertificate",
    "InadmissibleOpponentError",
    "admissibility_check",
    "opponent_tilt",
    "random_tilted_opponent",
    "EntropyBoundReport",
    "entropy_bound_check",
    "log_mgf_horizon",
    "game_cost_finite",
    "discounted_game_cost",
]


class InadmissibleOpponentError(ValueError):
    def __init__(self, certificate: "AdmissibilityCertificate"):
        super().__init__(
            f"opponent kernel is inadmissible at (state, action) = {certificate.witness}"
        )
        self.certificate = certificate


@dataclass(frozen=True)
class OpponentKernel:
    """Stationary opponent strategy: one probability row per (state, action).

    ``rows[x][i]`` is the opponent's next-state distribution when the
    controller plays ``actions[x][i]``; the layout mirrors the model
    kernel so the two can be compared row by row.
    """

    rows: tuple[np.ndarray, ...]

    def __post_init__(self):
        frozen = []
        for x, block in enumerate(self.rows):
            b = np.asarray(block, dtype=float)
            if b.ndim != 2:
                raise ValueError(f"state {x}: opponent rows must be 2-D")
            for r in b:
                as_prob_vector(r)
            b.setflags(write=False)
            frozen.append(b)
        object.__setattr__(self, "rows", tuple(frozen))

    def row(self, state: int, position: int) -> np.ndarray:
        return self.rows[state][position]


@dataclass(frozen=True)
class AdmissibilityCertificate:
    """Outcome of the admissibility test for an (policy, opponent) pair.

    When admissible, ``constant`` is the smallest C >= 0 with
    gamma * c(x,a) - R(p||q)(x,a) + C >= 0 on the policy's support.
    """

    admissible: bool
    constant: float
    witness: tuple[int, int] | None = None


def _policy_support(model: FiniteMDP, policy) -> list[tuple[int, int]]:
    """(state, action-position) pairs the policy can play at any stage."""
    pairs: set[tuple[int, int]] = set()
    if isinstance(policy, StationaryPolicy):
        require_policy(model, policy)
        for x in range(model.n_states):
            pairs.add((x, model.action_position(x, policy.choice[x])))
    elif isinstance(policy, RandomizedMarkovPolicy):
        for stage in policy.stages:
            if len(stage) != model.n_states:
                raise ValueError("policy stage does not match the state count")
            for x, weights in enumerate(stage):
                if len(weights) != len(model.actions[x]):
                    raise ValueError(
                        f"state {x}: stage weights not aligned with the action set"
                    )
                for i in np.flatnonzero(weights > 0.0):
                    pairs.add((x, int(i)))
    else:
        raise TypeError(f"unsupported policy type {type(policy).__name__}")
    return sorted(pairs)


def admissibility_check(
    model: FiniteMDP,
    policy,
    opponent: OpponentKernel,
    gamma: float,
) -> AdmissibilityCertificate:
    """Certify finite entropies and the payoff lower bound on the support."""
    worst = 0.0
    for x, i in _policy_support(model, policy):
        rel = relative_entropy(opponent.rows[x][i], model.kernel[x][i])
        if math.isinf(rel):
            return AdmissibilityCertificate(
                admissible=False, constant=math.inf, witness=(x, model.actions[x][i])
            )
        worst = max(worst, rel - gamma * float(model.cost[x][i]))
    return AdmissibilityCertificate(admissible=True, constant=max(0.0, worst))


def opponent_tilt(model: FiniteMDP, w: np.ndarray, beta: float) -> OpponentKernel:
    """The optimal opponent: every model row tilted by beta * w."""
    w = np.asarray(w, dtype=float)
    if w.shape != (model.n_states,):
        raise ValueError(f"w must have shape ({model.n_states},)")
    arg = beta * w
    rows = []
    for x in range(model.n_states):
        block = np.vstack([tilt(arg, r) for r in model.kernel[x]]) if len(
            model.actions[x]
        ) else np.zeros((0, model.n_states))
        rows.append(block)
    return OpponentKernel(tuple(rows))


def random_tilted_opponent(
    model: FiniteMDP, rng: np.random.Generator, scale: float = 5.0
) -> OpponentKernel:
    """Tilt every row by an independent bounded random vector.

    Tilting keeps the support of q, so the result is admissible for any
    policy by construction.
    """
    rows = []
    for x in range(model.n_states):
        block = []
        for r in model.kernel[x]:
            v = rng.uniform(-scale, scale, size=model.n_states)
            block.append(tilt(v, r))
        rows.append(
            np.vstack(block) if block else np.zeros((0, model.n_states))
        )
    return OpponentKernel(tuple(rows))


# ---------------------------------------------------------------------------
# entropy bound on the tilted opponent
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EntropyBoundReport:
    holds: bool
    max_entropy: float
    log_bound: float
    max_ratio: float


def entropy_bound_check(
    model: FiniteMDP, w: np.ndarray, beta: float, gamma: float, truncation: int
) -> EntropyBoundReport:
    """Check R(p0 || q) <= 2 t exp(t) with t = beta*N*gamma/(1-beta).

    Requires w inside the truncated-solution range 0 <= (1-beta) w <= N*gamma.
    The bound is compared in the log domain since exp(t) overflows for
    discount factors near 1.
    """
    w = np.asarray(w, dtype=float)
    slack = 1e-9
    if np.any((1.0 - beta) * w < -slack) or np.any(
        (1.0 - beta) * w > truncation * gamma + slack
    ):
        raise ValueError("w violates the truncated-solution range bound")
    t = beta * truncation * gamma / (1.0 - beta)
    log_bound = math.log(2.0) + math.log(t) + t
    p0 = opponent_tilt(model, w, beta)
    max_rel = 0.0
    for x in range(model.n_states):
        for i in range(len(model.actions[x])):
            rel = relative_entropy(p0.rows[x][i], model.kernel[x][i])
            max_rel = max(max_rel, rel)
    if max_rel == 0.0:
        return EntropyBoundReport(True, 0.0, log_bound, 0.0)
    ratio = math.exp(math.log(max_rel) - log_bound)
    return EntropyBoundReport(
        holds=math.log(max_rel) <= log_bound,
        max_entropy=max_rel,
        log_bound=log_bound,
        max_ratio=ratio,
    )


# ---------------------------------------------------------------------------
# finite-horizon and discounted costs
# ---------------------------------------------------------------------------


def log_mgf_horizon(model: FiniteMDP, policy, gamma: float, horizon: int) -> np.ndarray:
    """log E_x exp(gamma * sum of the first ``horizon`` costs), exactly.

    Stationary policies use the per-state backward recursion; randomized
    Markov policies mix over actions inside the expectation, stage by
    stage from the end.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if isinstance(policy, StationaryPolicy):
        require_policy(model, policy)
        c, rows = model.policy_arrays(policy)
        u = np.zeros(model.n_states)
        for _ in range(horizon):
            u = gamma * c + log_mgf_rows(u, rows)
        return u
    if not isinstance(policy, RandomizedMarkovPolicy):
        raise TypeError(f"unsupported policy type {type(policy).__name__}")
    if policy.horizon < horizon:
        raise ValueError(
            f"policy covers {policy.horizon} stages, horizon {horizon} requested"
        )
    ptr, cost, kern = model.flat
    u = np.zeros(model.n_states)
    for k in reversed(range(horizon)):
        action_vals = gamma * cost + log_mgf_rows(u, kern)
        nxt = np.empty(model.n_states)
        for x in range(model.n_states):
            weights = policy.stages[k][x]
            lo, hi = int(ptr[x]), int(ptr[x + 1])
            vals = action_vals[lo:hi]
            sup = weights > 0.0
            shift = float(vals[sup].max())
            nxt[x] = shift + math.log(
                float(np.dot(weights[sup], np.exp(vals[sup] - shift)))
            )
        u = nxt
    return u


def _stage_payoff_and_transition(
    model: FiniteMDP,
    opponent: OpponentKernel,
    gamma: float,
    rel: list[np.ndarray],
    stage_weights,
) -> tuple[np.ndarray, np.ndarray]:
    """Expected per-step payoff vector and state transition under (pi_k, p)."""
    n = model.n_states
    g = np.zeros(n)
    P = np.zeros((n, n))
    for x in range(n):
        weights = stage_weights[x]
        for i in np.flatnonzero(weights > 0.0):
            w = float(weights[i])
            g[x] += w * (gamma * float(model.cost[x][i]) - rel[x][i])
            P[x] += w * opponent.rows[x][i]
    return g, P


def _stationary_weights(model: FiniteMDP, policy: StationaryPolicy) -> list[np.ndarray]:
    weights = []
    for x in range(model.n_states):
        row = np.zeros(len(model.actions[x]))
        row[model.action_position(x, policy.choice[x])] = 1.0
        weights.append(row)
    return weights


def _entropy_table(model: FiniteMDP, opponent: OpponentKernel) -> list[np.ndarray]:
    table = []
    for x in range(model.n_states):
        table.append(
            np.array(
                [
                    relative_entropy(opponent.rows[x][i], model.kernel[x][i])
                    for i in range(len(model.actions[x]))
                ]
            )
        )
    return table


def game_cost_finite(
    model: FiniteMDP,
    policy,
    opponent: OpponentKernel,
    gamma: float,
    horizon: int,
) -> np.ndarray:
    """Total expected game payoff over ``horizon`` steps, per initial state.

    The state distribution is propagated exactly under the opponent's
    kernel (the opponent drives the dynamics), accumulating the payoff
    gamma * c - R at each stage.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    certificate = admissibility_check(model, policy, opponent, gamma)
    if not certificate.admissible:
        raise InadmissibleOpponentError(certificate)
    rel = _entropy_table(model, opponent)
    n = model.n_states
    if isinstance(policy, StationaryPolicy):
        stages = [_stationary_weights(model, policy)] * horizon
    else:
        if policy.horizon < horizon:
            raise ValueError(
                f"policy covers {policy.horizon} stages, horizon {horizon} requested"
            )
        stages = [policy.stages[k] for k in range(horizon)]
    total = np.zeros(n)
    dist = np.eye(n)  # row x = state distribution started from x
    for k in range(horizon):
        g, P = _stage_payoff_and_transition(model, opponent, gamma, rel, stages[k])
        total += dist @ g
        dist = dist @ P
    return total


def discounted_game_cost(
    model: FiniteMDP,
    policy: StationaryPolicy,
    opponent: OpponentKernel,
    beta: float,
    gamma: float,
    tol: float = 1e-10,
) -> np.ndarray:
    """Discounted game value sum_k beta^k E[gamma c - R], per initial state.

    The series is truncated once the geometric tail bound
    beta^(K+1) * (gamma * max_cost + C) / (1 - beta) drops to ``tol``,
    with C the admissibility constant controlling the payoff from below.
    """
    if not (0.0 < beta < 1.0):
        raise ValueError(f"beta must lie in (0, 1), got {beta!r}")
    if not isinstance(policy, StationaryPolicy):
        raise TypeError("discounted game values are defined for stationary policies")
    certificate = admissibility_check(model, policy, opponent, gamma)
    if not certificate.admissible:
        raise InadmissibleOpponentError(certificate)
    rel = _entropy_table(model, opponent)
    g, P = _stage_payoff_and_transition(
        model, opponent, gamma, rel, _stationary_weights(model, policy)
    )
    payoff_bound = gamma * model.max_cost + certificate.constant
    if payoff_bound == 0.0:
        return np.zeros(model.n_states)
    steps = int(math.ceil(math.log(tol * (1.0 - beta) / payoff_bound) / math.log(beta)))
    total = np.zeros(model.n_states)
    term = g.copy()  # beta^k * P^k g
    for _ in range(max(steps, 1)):
        total += term
        term = beta * (P @ term)
    return total
