"""Deformed (Tsallis) logarithm and exponential.

    log_rho(x) = (x**(1 - rho) - 1) / (1 - rho)
    exp_rho(x) = [1 + (1 - rho) * x]_+ ** (1 / (1 - rho))

Both reduce to the natural log/exp when rho == 1.  Inputs may be scalars or
numpy arrays; outputs follow numpy broadcasting.  The index may be any real
number here (``log_{2-rho}`` with rho >= 2 is needed for the duality
relation); regularizers restrict it to rho > 0 via ``check_rho``.

Useful relations, with lx = log_rho(x):

    log_rho(x / y) = (lx - ly) / (1 + (1 - rho) ly)
    log_rho(x * y) = lx + ly + (1 - rho) lx ly
    log_rho(1 / q) + log_{2-rho}(q) = 0
"""
import numpy as np

# below this distance from 1 the classical branch is used
RHO_ONE_TOL = 1e-8


def is_one(rho):
    return abs(rho - 1.0) < RHO_ONE_TOL


def check_rho(rho):
    rho = float(rho)
    if not np.isfinite(rho) or rho <= 0:
        raise ValueError(f"entropic index must be a positive finite number, got {rho!r}")
    return rho


def _index(rho):
    rho = float(rho)
    if not np.isfinite(rho):
        raise ValueError(f"deformation index must be finite, got {rho!r}")
    return rho


def log_rho(x, rho):
    """Deformed logarithm, defined for x > 0."""
    rho = _index(rho)
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError("log_rho is only defined for x > 0")
    if is_one(rho):
        out = np.log(x)
    else:
        d = 1.0 - rho
        # expm1 keeps precision when (1 - rho) * log(x) is small
        out = np.expm1(d * np.log(x)) / d
    return out[()] if out.ndim == 0 else out


def exp_rho(x, rho):
    """Deformed exponential.

    Returns 0 where the bracket is nonpositive and the exponent 1/(1 - rho)
    is positive, and +inf where it is nonpositive and the exponent is
    negative (the rho > 1 pole).
    """
    rho = _index(rho)
    x = np.asarray(x, dtype=float)
    if is_one(rho):
        out = np.exp(x)
        return out[()] if out.ndim == 0 else out
    d = 1.0 - rho
    # log1p(-1) = -inf maps to 0 (d > 0) or +inf (d < 0)
    with np.errstate(divide="ignore", over="ignore"):
        out = np.exp(np.log1p(np.maximum(d * x, -1.0)) / d)
    return out[()] if out.ndim == 0 else out
