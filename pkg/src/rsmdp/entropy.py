"""Relative entropy, log-moment-generating functions, and exponential tilting.

All operations work on finite probability vectors represented as plain
1-D numpy arrays.  Extended-real results use ``math.inf``.  Every
exponential is max-shifted over the support of the reference measure, so
values of arbitrary magnitude in the exponent are handled without
overflow.
"""

from __future__ import annotations

import math

import numpy as np

# Probability vectors must sum to 1 within this tolerance.  The tiny
# extra slack covers binary representation of decimal literals such as
# 0.999999999999, which is meant to sit exactly on the boundary.
PROB_SUM_TOL = 1e-12 * (1.0 + 1e-6)


def as_prob_vector(weights, dim: int | None = None) -> np.ndarray:
    """Validate and return a probability vector as a float64 array.

    Raises ValueError on negative entries, a sum off by more than the
    1e-12 tolerance, or (when ``dim`` is given) a dimension mismatch.
    """
    v = np.asarray(weights, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"probability vector must be 1-D, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise ValueError(f"expected dimension {dim}, got {v.shape[0]}")
    if v.size == 0:
        raise ValueError("probability vector must be nonempty")
    if np.any(v < 0.0) or not np.all(np.isfinite(v)):
        raise ValueError("probability vector has negative or non-finite entries")
    s = float(v.sum())
    if abs(s - 1.0) > PROB_SUM_TOL:
        raise ValueError(f"probability vector sums to {s!r}, not 1 within 1e-12")
    return v


def _check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")


def relative_entropy(mu, nu) -> float:
    """Kullback-Leibler divergence sum(mu * log(mu/nu)), possibly +inf.

    Conventions: 0*log(0/q) = 0; a point with mu > 0 but nu = 0 makes the
    divergence +inf (absolute-continuity failure).  The result is
    clamped at 0 to absorb rounding on near-identical inputs.
    """
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    _check_same_dim(mu, nu)
    pos = mu > 0.0
    if np.any(nu[pos] == 0.0):
        return math.inf
    m = mu[pos]
    val = float(np.sum(m * (np.log(m) - np.log(nu[pos]))))
    return max(val, 0.0)


def log_mgf(h, nu) -> float:
    """log sum(nu * exp(h)), max-shifted over the support of nu."""
    h = np.asarray(h, dtype=float)
    nu = np.asarray(nu, dtype=float)
    _check_same_dim(h, nu)
    sup = nu > 0.0
    hs = h[sup]
    shift = float(hs.max())
    return shift + math.log(float(np.dot(nu[sup], np.exp(hs - shift))))


def log_mgf_rows(h, rows) -> np.ndarray:
    """Row-wise log_mgf against a stack of probability rows.

    ``rows`` has shape (m, n) with each row a probability vector over the
    same n points as ``h``.  The shift is taken per row over that row's
    support, which keeps rows supported far below max(h) finite.
    """
    h = np.asarray(h, dtype=float)
    rows = np.asarray(rows, dtype=float)
    masked = np.where(rows > 0.0, h[None, :], -np.inf)
    shift = masked.max(axis=1)
    weights = np.exp(masked - shift[:, None])
    return shift + np.log(np.einsum("ij,ij->i", rows, weights))


def tilt(h, nu) -> np.ndarray:
    """Exponentially tilted measure nu * exp(h - log_mgf(h, nu)).

    The output shares the support of nu and is a valid probability
    vector; a constant h leaves nu unchanged.
    """
    h = np.asarray(h, dtype=float)
    nu = np.asarray(nu, dtype=float)
    _check_same_dim(h, nu)
    sup = nu > 0.0
    shift = float(h[sup].max())
    out = np.zeros_like(nu)
    out[sup] = nu[sup] * np.exp(h[sup] - shift)
    out /= out.sum()
    return out


def variational_gap(mu, h, nu) -> float:
    """Slack of the entropy duality: log_mgf(h, nu) + R(mu|nu) - <mu, h>.

    Nonnegative for every mu, zero exactly at mu = tilt(h, nu), and +inf
    when mu is not absolutely continuous with respect to nu.
    """
    mu = np.asarray(mu, dtype=float)
    h = np.asarray(h, dtype=float)
    _check_same_dim(mu, h)
    rel = relative_entropy(mu, nu)
    if math.isinf(rel):
        return math.inf
    return log_mgf(h, nu) + rel - float(np.dot(mu, h))
