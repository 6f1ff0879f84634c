"""Shared generators and independent oracles for the test suite.

Oracles here deliberately avoid the library's solution paths: horizon
costs come from explicit path enumeration, averages from matrix powers,
and the two-state fixed point from scalar bisection.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from rsmdp import FiniteMDP, RandomizedMarkovPolicy, StationaryPolicy


def random_model(
    rng: np.random.Generator,
    n_states: int,
    max_actions: int,
    max_cost: float = 1.0,
    min_actions: int = 1,
) -> FiniteMDP:
    """Random model with Dirichlet kernel rows and uniform costs."""
    actions = []
    cost = []
    kernel = []
    for _ in range(n_states):
        k = int(rng.integers(min_actions, max_actions + 1))
        actions.append(tuple(range(k)))
        cost.append(rng.uniform(0.0, max_cost, size=k))
        kernel.append(rng.dirichlet(np.ones(n_states), size=k))
    return FiniteMDP(n_states, tuple(actions), tuple(cost), tuple(kernel))


def random_policy(rng: np.random.Generator, model: FiniteMDP) -> StationaryPolicy:
    return StationaryPolicy(
        tuple(acts[rng.integers(len(acts))] for acts in model.actions)
    )


def random_markov_policy(
    rng: np.random.Generator, model: FiniteMDP, horizon: int
) -> RandomizedMarkovPolicy:
    stages = []
    for _ in range(horizon):
        stage = []
        for acts in model.actions:
            stage.append(rng.dirichlet(np.ones(len(acts))))
        stages.append(tuple(stage))
    return RandomizedMarkovPolicy(tuple(stages))


def stage_weights(model: FiniteMDP, policy, k: int) -> list[np.ndarray]:
    """Per-state action weights the policy plays at stage k."""
    if isinstance(policy, StationaryPolicy):
        out = []
        for x in range(model.n_states):
            w = np.zeros(len(model.actions[x]))
            w[model.action_position(x, policy.choice[x])] = 1.0
            out.append(w)
        return out
    return [np.asarray(w, dtype=float) for w in policy.stages[k]]


def brute_force_horizon_log_mgf(
    model: FiniteMDP, policy, gamma: float, horizon: int, start: int
) -> float:
    """log E exp(gamma * total cost) by full path enumeration."""
    total = 0.0
    states = range(model.n_states)

    def recurse(x: int, k: int, prob: float, accrued: float) -> float:
        if prob == 0.0:
            return 0.0
        if k == horizon:
            return prob * math.exp(gamma * accrued)
        weights = stage_weights(model, policy, k)[x]
        acc = 0.0
        for i in np.flatnonzero(weights > 0.0):
            p_a = prob * float(weights[i])
            c = float(model.cost[x][i])
            for y in states:
                q = float(model.kernel[x][i][y])
                if q > 0.0:
                    acc += recurse(y, k + 1, p_a * q, accrued + c)
        return acc

    total = recurse(start, 0, 1.0, 0.0)
    return math.log(total)


def neutral_n_step_average(
    model: FiniteMDP, policy: StationaryPolicy, n: int
) -> np.ndarray:
    """(1/n) sum_{k<n} P^k c under a fixed policy, by direct iteration."""
    c, P = model.policy_arrays(policy)
    v = c.copy()
    total = np.zeros_like(c)
    for _ in range(n):
        total += v
        v = P @ v
    return total / n


def example1_scalar_fixed_point(rho: float, gamma: float, beta: float) -> float:
    """Bisection solve of w = gamma + log((1-rho) e^{beta w} + rho)."""

    def excess(w: float) -> float:
        return gamma + math.log((1.0 - rho) * math.exp(beta * w) + rho) - w

    lo = 0.0
    hi = 1.0
    while excess(hi) > 0.0:
        hi *= 2.0
        if hi > 1e9:
            raise RuntimeError("no bracket: fixed point not finite?")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def example1_regime1_ceiling(rho: float, gamma: float) -> float:
    """Uniform-in-beta upper bound on the state-1 value in regime I.

    Derived from v < gamma + log(e^v (1-rho) + rho):
    e^v (1 - e^gamma (1-rho)) < e^gamma rho.  Also equals the log of the
    hitting-cost closed form, as it must.
    """
    r = math.exp(gamma) * (1.0 - rho)
    assert r < 1.0
    return math.log(math.exp(gamma) * rho / (1.0 - r))


def example1_hitting_closed_form(rho: float, gamma: float) -> float:
    """(rho/(1-rho)) * e^gamma (1-rho) / (1 - e^gamma (1-rho)): the
    expected exponential cost from state 1 until state 0 in regime I."""
    r = math.exp(gamma) * (1.0 - rho)
    assert r < 1.0
    return (rho / (1.0 - rho)) * r / (1.0 - r)


def example1_hitting_series(rho: float, gamma: float, rel_tol: float = 1e-14) -> float:
    """Direct summation of sum_{n>=1} e^{n gamma} (1-rho)^{n-1} rho."""
    total = 0.0
    term = math.exp(gamma) * rho
    ratio = math.exp(gamma) * (1.0 - rho)
    while True:
        total += term
        term *= ratio
        if term < rel_tol * total:
            return total


def simulate_average_cost(
    rng: np.random.Generator,
    model: FiniteMDP,
    policy: StationaryPolicy,
    start: int,
    steps: int,
) -> float:
    """Monte Carlo trajectory average of the per-step cost."""
    c, P = model.policy_arrays(policy)
    cum = np.cumsum(P, axis=1)
    x = start
    total = 0.0
    draws = rng.random(steps)
    for k in range(steps):
        total += c[x]
        x = int(np.searchsorted(cum[x], draws[k]))
    return total / steps


def all_policies(model: FiniteMDP) -> list[StationaryPolicy]:
    return [StationaryPolicy(combo) for combo in itertools.product(*model.actions)]
