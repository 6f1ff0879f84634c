"""Hot inner loops, jitted with numba when available.

The solvers call these through thin wrappers; a pure-Python fallback
keeps the package importable (slowly) without numba.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(func):
            return func

        if args and callable(args[0]):
            return args[0]
        return wrap


@njit(cache=True)
def bellman_iterate(w0, state_ptr, gc, kernel, beta, tol, max_iter):
    """Fixed-point iteration of the log-domain minimizing backup.

    One sweep maps w to, per state, the minimum over that state's action
    rows of gc[a] + log sum_y kernel[a, y] * exp(beta * w[y]), with the
    exponent shifted by its per-row support maximum.  Stops when the
    contraction bound (beta / (1 - beta)) * step falls to ``tol``.

    Returns (w, iterations, last_step, converged).
    """
    n = w0.shape[0]
    cur = w0.copy()
    nxt = np.empty(n)
    factor = beta / (1.0 - beta)
    step = np.inf
    it = 0
    while it < max_iter:
        it += 1
        step = 0.0
        for x in range(n):
            best = np.inf
            for a in range(state_ptr[x], state_ptr[x + 1]):
                m = -np.inf
                for y in range(n):
                    if kernel[a, y] > 0.0:
                        t = beta * cur[y]
                        if t > m:
                            m = t
                s = 0.0
                for y in range(n):
                    ky = kernel[a, y]
                    if ky > 0.0:
                        s += ky * np.exp(beta * cur[y] - m)
                v = gc[a] + m + np.log(s)
                if v < best:
                    best = v
            nxt[x] = best
            d = abs(best - cur[x])
            if d > step:
                step = d
        tmp = cur
        cur = nxt
        nxt = tmp
        if factor * step <= tol:
            return cur, it, step, True
    return cur, it, step, False


@njit(cache=True)
def policy_recursion(u0, gc, kernel, steps):
    """Run ``steps`` backward steps of u <- gc + log sum kernel * exp(u).

    ``gc`` and ``kernel`` are the per-state cost vector (already scaled
    by the risk factor) and transition matrix of a fixed policy.
    """
    n = u0.shape[0]
    cur = u0.copy()
    nxt = np.empty(n)
    for _ in range(steps):
        for x in range(n):
            m = -np.inf
            for y in range(n):
                if kernel[x, y] > 0.0:
                    t = cur[y]
                    if t > m:
                        m = t
            s = 0.0
            for y in range(n):
                ky = kernel[x, y]
                if ky > 0.0:
                    s += ky * np.exp(cur[y] - m)
            nxt[x] = gc[x] + m + np.log(s)
        tmp = cur
        cur = nxt
        nxt = tmp
    return cur
