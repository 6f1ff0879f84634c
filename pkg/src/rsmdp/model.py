"""Finite controlled Markov model: types, validation, serialization, built-ins.

A model consists of ``n_states`` states, a per-state list of admissible
action indices (ragged, so each state carries exactly its own action
set), one nonnegative finite cost per (state, action), and one
probability row over states per (state, action).  Instances are
immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from .entropy import PROB_SUM_TOL

__all__ = [
    "FiniteMDP",
    "StationaryPolicy",
    "RandomizedMarkovPolicy",
    "Regime",
    "Violation",
    "ValidationReport",
    "ModelFormatError",
    "ModelValidationError",
    "validate_model",
    "load_model",
    "save_model",
    "make_example1",
    "classify_regime",
    "neutral_average_cost",
    "enumerate_stationary_policies",
    "sample_stationary_policies",
]

REGIME_BOUNDARY_TOL = 1e-12


class ModelFormatError(ValueError):
    """Raised when model text cannot be parsed into the file schema."""


class ModelValidationError(ValueError):
    """Raised when a schema-valid model violates a model invariant."""

    def __init__(self, report: "ValidationReport"):
        super().__init__(str(report))
        self.report = report


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FiniteMDP:
    """Finite control model (states, ragged action sets, costs, kernel rows).

    ``cost[x][i]`` and ``kernel[x][i]`` refer to action ``actions[x][i]``;
    ``kernel[x]`` has shape (len(actions[x]), n_states).
    """

    n_states: int
    actions: tuple[tuple[int, ...], ...]
    cost: tuple[np.ndarray, ...]
    kernel: tuple[np.ndarray, ...]
    label: str = ""

    def __post_init__(self):
        n = int(self.n_states)
        object.__setattr__(self, "n_states", n)
        if n < 1:
            raise ModelFormatError("n_states must be >= 1")
        acts = tuple(tuple(int(a) for a in row) for row in self.actions)
        if len(acts) != n:
            raise ModelFormatError(f"actions lists {len(acts)} states, expected {n}")
        if len(self.cost) != n or len(self.kernel) != n:
            raise ModelFormatError("cost/kernel must list one entry per state")
        costs = []
        kernels = []
        for x in range(n):
            m = len(acts[x])
            c = np.asarray(self.cost[x], dtype=float).reshape(m)
            k = np.asarray(self.kernel[x], dtype=float)
            if k.size == 0:
                k = k.reshape(m, n) if m == 0 else k.reshape(m, 0)
            if k.shape != (m, n):
                raise ModelFormatError(
                    f"kernel rows for state {x} have shape {k.shape}, expected {(m, n)}"
                )
            costs.append(_freeze(c))
            kernels.append(_freeze(k))
        object.__setattr__(self, "actions", acts)
        object.__setattr__(self, "cost", tuple(costs))
        object.__setattr__(self, "kernel", tuple(kernels))
        object.__setattr__(self, "label", str(self.label))

    # -- structural helpers -------------------------------------------------

    @cached_property
    def flat(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(state_ptr, cost, kernel) with all action rows stacked.

        ``state_ptr`` has length n_states+1; rows state_ptr[x]:state_ptr[x+1]
        of the stacked arrays belong to state x.
        """
        ptr = np.zeros(self.n_states + 1, dtype=np.int64)
        for x in range(self.n_states):
            ptr[x + 1] = ptr[x] + len(self.actions[x])
        total = int(ptr[-1])
        cost = np.empty(total, dtype=float)
        kern = np.empty((total, self.n_states), dtype=float)
        for x in range(self.n_states):
            lo, hi = ptr[x], ptr[x + 1]
            if hi > lo:
                cost[lo:hi] = self.cost[x]
                kern[lo:hi] = self.kernel[x]
        return _freeze(ptr), _freeze(cost), _freeze(kern)

    @cached_property
    def max_cost(self) -> float:
        entries = [c.max() for c in self.cost if c.size]
        return float(max(entries)) if entries else 0.0

    @property
    def n_state_action_pairs(self) -> int:
        return sum(len(a) for a in self.actions)

    def n_stationary_policies(self) -> int:
        count = 1
        for a in self.actions:
            count *= max(len(a), 1)
        return count

    def action_position(self, state: int, action: int) -> int:
        """Index of ``action`` within the admissible list of ``state``."""
        try:
            return self.actions[state].index(action)
        except ValueError:
            raise ValueError(
                f"action {action} is not admissible in state {state}"
            ) from None

    def policy_arrays(self, policy: "StationaryPolicy") -> tuple[np.ndarray, np.ndarray]:
        """Cost vector and transition matrix induced by a stationary policy."""
        pos = [self.action_position(x, policy.choice[x]) for x in range(self.n_states)]
        c = np.array([self.cost[x][pos[x]] for x in range(self.n_states)])
        rows = np.vstack([self.kernel[x][pos[x]] for x in range(self.n_states)])
        return c, rows


@dataclass(frozen=True)
class StationaryPolicy:
    """Deterministic selector: ``choice[x]`` is the action taken in state x."""

    choice: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "choice", tuple(int(a) for a in self.choice))

    def action(self, state: int) -> int:
        return self.choice[state]


@dataclass(frozen=True)
class RandomizedMarkovPolicy:
    """Finite-horizon randomized Markov policy.

    ``stages[k][x]`` is a probability vector over the admissible actions
    of state x (aligned with ``model.actions[x]``), used at stage k.
    """

    stages: tuple[tuple[np.ndarray, ...], ...]

    def __post_init__(self):
        frozen_stages = []
        for k, stage in enumerate(self.stages):
            rows = []
            for x, row in enumerate(stage):
                r = np.asarray(row, dtype=float)
                if r.ndim != 1 or r.size == 0:
                    raise ValueError(f"stage {k}, state {x}: malformed action weights")
                if np.any(r < 0.0) or abs(float(r.sum()) - 1.0) > PROB_SUM_TOL:
                    raise ValueError(
                        f"stage {k}, state {x}: action weights must be a "
                        "probability vector within 1e-12"
                    )
                rows.append(_freeze(r))
            frozen_stages.append(tuple(rows))
        object.__setattr__(self, "stages", tuple(frozen_stages))

    @property
    def horizon(self) -> int:
        return len(self.stages)

    @classmethod
    def from_stationary(
        cls, model: FiniteMDP, policy: StationaryPolicy, horizon: int
    ) -> "RandomizedMarkovPolicy":
        stage = []
        for x in range(model.n_states):
            row = np.zeros(len(model.actions[x]))
            row[model.action_position(x, policy.choice[x])] = 1.0
            stage.append(row)
        return cls(tuple(tuple(stage) for _ in range(horizon)))


@dataclass(frozen=True)
class Regime:
    """Risk-factor regime of the two-state built-in model.

    ``case`` is "I", "II" or "III" according to gamma below, at, or above
    the boundary -log(1 - rho); equality is resolved within 1e-12.
    """

    case: str
    boundary: float

    def __str__(self) -> str:
        return f"regime {self.case} (boundary {self.boundary:.12g})"


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    state: int | None
    action: int | None
    message: str

    def __str__(self) -> str:
        where = ""
        if self.state is not None:
            where = f"state {self.state}"
            if self.action is not None:
                where += f", action {self.action}"
            where = f" [{where}]"
        return self.message + where


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if self.ok:
            return "model valid"
        return "; ".join(str(v) for v in self.violations)


def validate_model(model: FiniteMDP) -> ValidationReport:
    """Check model invariants; returns a report and never raises.

    Flags empty action sets, duplicate action indices, negative or
    non-finite costs, negative kernel entries, and kernel rows whose sum
    differs from 1 by more than 1e-12.
    """
    bad: list[Violation] = []
    for x in range(model.n_states):
        acts = model.actions[x]
        if not acts:
            bad.append(Violation(x, None, "state has no admissible action"))
            continue
        if len(set(acts)) != len(acts):
            bad.append(Violation(x, None, "duplicate action index"))
        for i, a in enumerate(acts):
            c = float(model.cost[x][i])
            if not math.isfinite(c):
                bad.append(Violation(x, a, f"cost {c!r} is not finite"))
            elif c < 0.0:
                bad.append(Violation(x, a, f"cost {c!r} is negative"))
            row = model.kernel[x][i]
            if np.any(row < 0.0):
                bad.append(Violation(x, a, "kernel row has negative entries"))
            elif not np.all(np.isfinite(row)):
                bad.append(Violation(x, a, "kernel row has non-finite entries"))
            else:
                s = float(row.sum())
                if abs(s - 1.0) > PROB_SUM_TOL:
                    bad.append(
                        Violation(x, a, f"kernel row sums to {s!r}, not 1 within 1e-12")
                    )
    return ValidationReport(tuple(bad))


def require_valid(model: FiniteMDP) -> FiniteMDP:
    report = validate_model(model)
    if not report.ok:
        raise ModelValidationError(report)
    return model


def require_policy(model: FiniteMDP, policy: StationaryPolicy) -> StationaryPolicy:
    if len(policy.choice) != model.n_states:
        raise ValueError("policy length does not match state count")
    for x, a in enumerate(policy.choice):
        model.action_position(x, a)
    return policy


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def save_model(model: FiniteMDP) -> str:
    """Serialize to the JSON model-file format (round-trips bit-exactly)."""
    doc = {
        "n_states": model.n_states,
        "actions": [list(a) for a in model.actions],
        "cost": [list(map(float, c)) for c in model.cost],
        "kernel": [[list(map(float, row)) for row in k] for k in model.kernel],
        "label": model.label,
    }
    return json.dumps(doc, indent=2)


def load_model(text: str) -> FiniteMDP:
    """Parse a model file; malformed text and invalid models raise differently.

    Raises ModelFormatError for non-JSON input or schema mismatches, and
    ModelValidationError when the parsed model violates an invariant.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelFormatError("top level must be an object")
    try:
        model = FiniteMDP(
            n_states=doc["n_states"],
            actions=tuple(tuple(a) for a in doc["actions"]),
            cost=tuple(np.asarray(c, dtype=float) for c in doc["cost"]),
            kernel=tuple(
                np.asarray(k, dtype=float).reshape(len(acts), -1)
                if len(acts)
                else np.zeros((0, int(doc["n_states"])))
                for k, acts in zip(doc["kernel"], doc["actions"])
            ),
            label=doc.get("label", ""),
        )
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"does not match the model schema: {exc}") from exc
    return require_valid(model)


# ---------------------------------------------------------------------------
# built-in models
# ---------------------------------------------------------------------------


def make_example1(rho: float) -> FiniteMDP:
    """Two-state single-action chain: state 0 absorbing with zero cost,
    state 1 costs 1 and falls into state 0 with probability rho."""
    rho = float(rho)
    if not (0.0 < rho < 1.0):
        raise ValueError(f"rho must lie strictly inside (0, 1), got {rho!r}")
    return FiniteMDP(
        n_states=2,
        actions=((0,), (0,)),
        cost=(np.array([0.0]), np.array([1.0])),
        kernel=(
            np.array([[1.0, 0.0]]),
            np.array([[rho, 1.0 - rho]]),
        ),
        label=f"example1 rho={rho:g}",
    )


def classify_regime(rho: float, gamma: float) -> Regime:
    """Place the risk factor against the boundary -log(1 - rho)."""
    rho = float(rho)
    gamma = float(gamma)
    if not (0.0 < rho < 1.0):
        raise ValueError(f"rho must lie strictly inside (0, 1), got {rho!r}")
    if not (gamma > 0.0) or not math.isfinite(gamma):
        raise ValueError(f"gamma must be positive and finite, got {gamma!r}")
    boundary = -math.log(1.0 - rho)
    if abs(gamma - boundary) <= REGIME_BOUNDARY_TOL:
        case = "II"
    elif gamma < boundary:
        case = "I"
    else:
        case = "III"
    return Regime(case, boundary)


# ---------------------------------------------------------------------------
# risk-neutral reference
# ---------------------------------------------------------------------------


def neutral_average_cost(
    model: FiniteMDP,
    policy: StationaryPolicy,
    tol: float = 1e-10,
    max_iter: int = 2_000_000,
) -> np.ndarray:
    """Long-run expected average cost of a fixed stationary policy.

    Computed as the limit of running averages (1/n) sum_{k<n} P^k c,
    iterated until successive averages differ by at most ``tol`` in sup
    norm.  Raises RuntimeError if the cap is hit, which signals a
    pathological period rather than a tolerance problem.
    """
    require_policy(model, policy)
    c, P = model.policy_arrays(policy)
    v = c.copy()
    total = np.zeros_like(c)
    avg_prev = None
    for k in range(max_iter):
        total += v
        avg = total / (k + 1)
        if avg_prev is not None and float(np.abs(avg - avg_prev).max()) <= tol:
            return avg
        avg_prev = avg
        v = P @ v
    raise RuntimeError(
        f"running averages did not settle within {max_iter} iterations"
    )


# ---------------------------------------------------------------------------
# policy enumeration and sampling
# ---------------------------------------------------------------------------


def enumerate_stationary_policies(model: FiniteMDP) -> Iterator[StationaryPolicy]:
    """Yield every deterministic stationary policy of the model."""
    for combo in itertools.product(*model.actions):
        yield StationaryPolicy(combo)


def sample_stationary_policies(
    model: FiniteMDP, count: int, rng: np.random.Generator
) -> list[StationaryPolicy]:
    """Draw ``count`` stationary policies uniformly (with replacement)."""
    out = []
    for _ in range(count):
        out.append(
            StationaryPolicy(
                tuple(acts[rng.integers(len(acts))] for acts in model.actions)
            )
        )
    return out


def candidate_policies(
    model: FiniteMDP,
    limit: int = 4096,
    sample: int = 256,
    rng: np.random.Generator | None = None,
    include: Sequence[StationaryPolicy] = (),
) -> tuple[list[StationaryPolicy], bool]:
    """All deterministic stationary policies when there are at most
    ``limit`` of them, else ``include`` plus random samples.

    Returns (policies, exhaustive).
    """
    if model.n_stationary_policies() <= limit:
        return list(enumerate_stationary_policies(model)), True
    rng = rng if rng is not None else np.random.default_rng(0)
    pool = list(include)
    pool.extend(sample_stationary_policies(model, max(sample - len(pool), 0), rng))
    seen = set()
    unique = []
    for p in pool:
        if p.choice not in seen:
            seen.add(p.choice)
            unique.append(p)
    return unique, False
