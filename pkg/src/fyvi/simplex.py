"""Regularized prediction maps on the probability simplex and Fenchel-Young losses.

All functions accept a single score vector of shape ``(K,)`` or a batch of
shape ``(N, K)`` (one problem per row) and return matching shapes.

Scaling convention
------------------
With the Tsallis negentropy

    Omega_rho(q) = sum_k q_k (q_k**(rho - 1) - 1) / (rho (rho - 1))

the maximizer of <q, eta> - Omega_rho(q) is

    q_k = exp_{2-rho}(eta_k - A) = [1 + (rho - 1)(eta_k - A)]_+ ** (1 / (rho - 1))

with ``A`` chosen so that q sums to one.  This gives softmax as rho -> 1 and
the Euclidean projection (sparsemax) at rho = 2 with no extra rescaling of
the scores; the closed-form paths are cross-checked against the bisection
path in the test-suite.
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, xlogy

from . import _kernels
from .deformed import check_rho, is_one
from .errors import NumericFailure

TRUNCATE_BELOW = 1e-12
BISECT_TOL = 1e-10
BISECT_MAX_ITER = 200


@dataclass(frozen=True)
class Regularizer:
    """Tsallis negentropy with entropic index ``rho``, or the zero regularizer.

    ``rho is None`` encodes the zero regularizer (hard argmax map).
    """

    rho: float | None = 1.0

    def __post_init__(self):
        if self.rho is not None:
            object.__setattr__(self, "rho", check_rho(self.rho))

    @classmethod
    def tsallis(cls, rho):
        return cls(rho)

    @classmethod
    def zero(cls):
        return cls(None)

    @classmethod
    def parse(cls, text):
        """``'hard'``/``'zero'`` or a positive number."""
        text = str(text).strip().lower()
        if text in ("hard", "zero", "none"):
            return cls.zero()
        return cls(float(text))

    @property
    def is_zero(self):
        return self.rho is None

    @property
    def is_shannon(self):
        return self.rho is not None and is_one(self.rho)

    @property
    def is_sparse(self):
        """True when the map can return exact zeros (rho > 1 or zero regularizer)."""
        return self.rho is None or (self.rho > 1 and not is_one(self.rho))

    def __str__(self):
        return "zero" if self.rho is None else f"tsallis({self.rho:g})"


SHANNON = Regularizer(1.0)
SPARSEMAX = Regularizer(2.0)
ZERO = Regularizer.zero()


def _as_rows(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return x[None, :], True
    if x.ndim != 2:
        raise ValueError(f"expected a vector or a matrix of scores, got shape {x.shape}")
    return x, False


def _check_finite(eta):
    if eta.shape[-1] < 1:
        raise ValueError("score vectors must have at least one entry")
    if not np.all(np.isfinite(eta)):
        raise ValueError("scores must be finite")


def support(q):
    """Indices of strictly positive entries of a single distribution."""
    return np.flatnonzero(np.asarray(q) > 0)


def support_size(q):
    return np.count_nonzero(np.asarray(q) > 0, axis=-1)


def tsallis_negentropy(q, rho):
    """Omega_rho(q); Shannon negentropy sum q log q at rho = 1 (0 log 0 = 0)."""
    rho = check_rho(rho)
    q = np.asarray(q, dtype=float)
    if is_one(rho):
        return xlogy(q, q).sum(axis=-1)
    r1 = rho - 1.0
    pos = q > 0
    logq = np.log(np.where(pos, q, 1.0))
    # expm1 keeps the rho -> 1 limit accurate
    terms = np.where(pos, q * np.expm1(r1 * logq) / (rho * r1), 0.0)
    return terms.sum(axis=-1)


def regularizer_value(q, omega):
    if omega.is_zero:
        return np.zeros(np.asarray(q).shape[:-1])[()]
    return tsallis_negentropy(q, omega.rho)


def hard_argmax(eta):
    """Uniform distribution over the (exact) maximizers of each row."""
    rows, single = _as_rows(eta)
    hits = (rows == rows.max(axis=1, keepdims=True)).astype(float)
    out = hits / hits.sum(axis=1, keepdims=True)
    return out[0] if single else out


def entmax_bisect(eta, rho, tol=BISECT_TOL, max_iter=BISECT_MAX_ITER):
    """rho-entmax by bisection on the normalizer, for any rho > 0, rho != 1."""
    rho = check_rho(rho)
    if is_one(rho):
        raise ValueError("bisection is undefined at rho = 1; use softmax")
    rows, single = _as_rows(eta)
    _check_finite(rows)
    p, residual, ok = _kernels.entmax_bisect_rows(rows, rho, tol, max_iter)
    if not np.all(ok):
        worst = float(residual[~ok].max())
        raise NumericFailure(
            f"entmax bisection (rho={rho:g}) did not converge in {max_iter} iterations; "
            f"residual {worst:.3e}", residual=worst)
    if rho > 1:
        p = _truncate(p)
    return p[0] if single else p


def sparsemax(eta):
    rows, single = _as_rows(eta)
    _check_finite(rows)
    p = _truncate(_kernels.sparsemax_rows(rows))
    return p[0] if single else p


def softmax(eta):
    rows, single = _as_rows(eta)
    _check_finite(rows)
    p = _kernels.softmax_rows(rows)
    return p[0] if single else p


def _truncate(p):
    small = p < TRUNCATE_BELOW
    if small.any():
        p = np.where(small, 0.0, p)
        p /= p.sum(axis=1, keepdims=True)
    return p


def prediction_map(eta, omega=SHANNON):
    """argmax_q <q, eta> - Omega(q) over the simplex, row-wise.

    Dispatch: zero regularizer -> hard argmax, rho = 1 -> softmax,
    rho = 2 -> sort-based sparsemax, otherwise bisection.
    """
    if omega.is_zero:
        rows, _ = _as_rows(eta)
        _check_finite(rows)
        return hard_argmax(eta)
    if omega.is_shannon:
        return softmax(eta)
    if omega.rho == 2.0:
        return sparsemax(eta)
    return entmax_bisect(eta, omega.rho)


def conjugate(eta, omega=SHANNON):
    """Omega*(eta) = <q*, eta> - Omega(q*) with q* the prediction map."""
    eta = np.asarray(eta, dtype=float)
    if omega.is_zero:
        _check_finite(eta)
        return eta.max(axis=-1)
    if omega.is_shannon:
        _check_finite(eta)
        return logsumexp(eta, axis=-1)
    q = prediction_map(eta, omega)
    return (q * eta).sum(axis=-1) - tsallis_negentropy(q, omega.rho)


def fy_loss(eta, q, omega=SHANNON):
    """Fenchel-Young loss Omega*(eta) - <q, eta> + Omega(q); nonnegative."""
    eta = np.asarray(eta, dtype=float)
    q = np.asarray(q, dtype=float)
    return conjugate(eta, omega) - (q * eta).sum(axis=-1) + regularizer_value(q, omega)


def fy_loss_score_gradient(eta, q, omega=SHANNON):
    """Gradient of ``fy_loss`` in ``eta``: prediction_map(eta) - q."""
    return prediction_map(eta, omega) - np.asarray(q, dtype=float)


def fyvi_solve(eta, loss, omega=SHANNON):
    """Fenchel-Young posterior over a finite latent domain.

    Minimizes E_q[loss] + fy_loss(eta, q) over the simplex, which is the
    prediction map of ``eta - loss``.
    """
    eta = np.asarray(eta, dtype=float)
    loss = np.asarray(loss, dtype=float)
    if eta.shape != loss.shape:
        raise ValueError(f"eta and loss shapes differ: {eta.shape} vs {loss.shape}")
    return prediction_map(eta - loss, omega)
