"""Pure-numpy batch kernels; fallback for the compiled ``_ckernels``.

Rows are independent.  The entmax solver uses the parametrization

    p_k = exp_{2-rho}(y_k - a),   y = x - max(x),

so the normalizer ``a`` is bracketed by [0, -log_{2-rho}(1/K)] for every
rho != 1 (both the sparse rho > 1 and the heavy-tailed rho < 1 side).
"""
import numpy as np

EPS = np.finfo(float).eps


def _deformed_mass(y, a, r1):
    # exp_{2-rho}(y - a), r1 = rho - 1
    with np.errstate(divide="ignore"):
        return np.exp(np.log1p(np.maximum(r1 * (y - a[:, None]), -1.0)) / r1)


def upper_bracket(k, rho):
    r1 = rho - 1.0
    return -np.expm1(-r1 * np.log(k)) / r1


def entmax_bisect_rows(x, rho, tol=1e-10, max_iter=200):
    """Solve rho-entmax for each row of ``x`` by bisection on the normalizer.

    Returns ``(p, residual, converged)``; ``p`` rows are renormalized.
    A row counts as converged when its mass residual is within ``tol`` or
    the bracket has shrunk to floating-point resolution.
    """
    x = np.ascontiguousarray(x, dtype=float)
    n, k = x.shape
    r1 = rho - 1.0
    y = x - x.max(axis=1, keepdims=True)
    lo = np.zeros(n)
    hi = np.full(n, upper_bracket(k, rho))
    a = 0.5 * (lo + hi)
    f = np.zeros(n)
    active = np.ones(n, dtype=bool)
    converged = np.zeros(n, dtype=bool)
    for _ in range(max_iter):
        a = np.where(active, 0.5 * (lo + hi), a)
        f_new = _deformed_mass(y, a, r1).sum(axis=1) - 1.0
        f = np.where(active, f_new, f)
        done = active & ((np.abs(f) <= tol) | (hi - lo <= 4 * EPS * np.maximum(1.0, hi)))
        converged |= done
        active &= ~done
        if not active.any():
            break
        up = active & (f > 0)
        down = active & ~(f > 0)
        lo = np.where(up, a, lo)
        hi = np.where(down, a, hi)
    p = _deformed_mass(y, a, r1)
    p /= p.sum(axis=1, keepdims=True)
    return p, np.abs(f), converged


def sparsemax_rows(x):
    """Euclidean projection of each row onto the simplex (sort-based)."""
    x = np.ascontiguousarray(x, dtype=float)
    n, k = x.shape
    u = -np.sort(-x, axis=1)
    cssv = np.cumsum(u, axis=1) - 1.0
    ind = np.arange(1, k + 1)
    cond = u - cssv / ind > 0
    support = np.count_nonzero(cond, axis=1)
    tau = cssv[np.arange(n), support - 1] / support
    return np.maximum(x - tau[:, None], 0.0)


def softmax_rows(x):
    x = np.asarray(x, dtype=float)
    e = np.exp(x - x.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)
