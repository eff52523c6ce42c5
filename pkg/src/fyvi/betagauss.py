"""The (2 - rho)-Gaussian ("truncated parabola") location-scale family.

The standard member is the Omega_rho prediction map of the standard-normal
score eta(z) = -z**2 / 2 on the real line,

    f(u) = [(rho - 1) (a - u**2 / 2)]_+ ** p,      p = 1 / (rho - 1),

supported on |u| <= R = sqrt(2 a), with ``a`` fixed by normalization.  It
tends to the standard normal density as rho -> 1, is the Biweight kernel
shape at rho = 3/2 and the Epanechnikov shape at rho = 2.  A member with
location ``mu`` and scale ``sigma`` has density f((z - mu) / sigma) / sigma
in each coordinate; coordinates are independent.

Per-rho constants are obtained by Gauss-Legendre quadrature and cached.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .deformed import is_one
from .errors import NumericFailure

GL_NODES = 512
GL_PANELS = 8
CDF_KNOTS = 4096
INVERSE_CDF_TOL = 1e-10


def _check_family_rho(rho):
    rho = float(rho)
    if not (is_one(rho) or 1.0 < rho <= 2.0):
        raise ValueError(f"(2-rho)-Gaussian needs rho = 1 or 1 < rho <= 2, got {rho!r}")
    return 1.0 if is_one(rho) else rho


@dataclass(frozen=True, eq=False)
class BetaGaussian:
    """Diagonal (2 - rho)-Gaussian with location ``mu`` and scale ``sigma`` (both shape (D,))."""

    mu: np.ndarray
    sigma: np.ndarray
    rho: float = 1.0

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        sigma = np.atleast_1d(np.asarray(self.sigma, dtype=float))
        if mu.shape != sigma.shape or mu.ndim != 1:
            raise ValueError(f"mu and sigma must be vectors of equal length, got {mu.shape} and {sigma.shape}")
        if np.any(~(sigma > 0)) or not np.all(np.isfinite(mu)) or not np.all(np.isfinite(sigma)):
            raise ValueError("sigma must be positive and all parameters finite")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "rho", _check_family_rho(self.rho))

    @property
    def dim(self):
        return self.mu.shape[0]


@dataclass(frozen=True)
class StandardNormalScore:
    """Score of a N(0, I) prior: eta(z) = -||z||**2 / 2."""

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        return -0.5 * np.sum(z * z, axis=-1)


STANDARD_NORMAL = StandardNormalScore()


@lru_cache(maxsize=None)
def _gauss_legendre(n=GL_NODES, panels=GL_PANELS):
    """Composite rule on [-1, 1]: ``panels`` equal panels, n // panels nodes each."""
    x, w = np.polynomial.legendre.leggauss(n // panels)
    edges = np.linspace(-1.0, 1.0, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def unit_moments(k):
    """(I_k, J_k) = (int (1 - w^2)^k dw, int w^2 (1 - w^2)^k dw) over [-1, 1].

    Integrated in t = sqrt(k) w so that large k (rho near 1), where the
    integrand is a narrow Gaussian-like spike, stays well resolved.
    """
    s = np.sqrt(k)
    half = min(s, 12.0)
    nodes, weights = _gauss_legendre()
    t = half * nodes
    with np.errstate(divide="ignore"):
        base = np.where(t * t < k, np.exp(k * np.log1p(-np.minimum(t * t / k, 1.0))), 0.0)
    i_k = half * np.dot(weights, base) / s
    j_k = half * np.dot(weights, base * t * t) / s ** 3
    return i_k, j_k


@dataclass(frozen=True)
class StandardMember:
    """Cached constants of the rho-indexed standard member (mu = 0, sigma = 1)."""

    rho: float
    log_peak: float      # log f(0)
    radius: float        # support half-width R (inf for rho = 1)
    variance: float      # int u^2 f(u) du
    power_integral: float  # int f(u)^rho du
    conjugate: float     # Omega_rho^*(eta) for eta(u) = -u^2 / 2

    @property
    def negentropy(self):
        if self.rho == 1.0:
            return -0.5 * np.log(2 * np.pi * np.e)
        return (self.power_integral - 1.0) / (self.rho * (self.rho - 1.0))


@lru_cache(maxsize=None)
def standard_member(rho):
    rho = _check_family_rho(rho)
    if rho == 1.0:
        return StandardMember(1.0, -0.5 * np.log(2 * np.pi), np.inf, 1.0, 1.0, 0.5 * np.log(2 * np.pi))
    r1 = rho - 1.0
    p = 1.0 / r1
    i_p, j_p = unit_moments(p)
    i_p1, _ = unit_moments(p + 1.0)
    # c = log((rho - 1) a) from  ((rho - 1) a)^p sqrt(2 a) I_p = 1
    c = (0.5 * np.log(r1) - 0.5 * np.log(2.0) - np.log(i_p)) / (p + 0.5)
    a = np.exp(c) / r1
    radius = np.sqrt(2.0 * a)
    variance = 2.0 * a * j_p / i_p
    power_integral = np.exp((p + 1.0) * c) * radius * i_p1
    if not np.all(np.isfinite([c, radius, variance, power_integral])):
        raise NumericFailure(f"quadrature for the rho={rho:g} standard member failed")
    negentropy = (power_integral - 1.0) / (rho * r1)
    return StandardMember(rho, p * c, radius, variance, power_integral, -0.5 * variance - negentropy)


def standard_logpdf(u, rho):
    m = standard_member(rho)
    u = np.asarray(u, dtype=float)
    if m.rho == 1.0:
        return m.log_peak - 0.5 * u * u
    p = 1.0 / (m.rho - 1.0)
    w2 = (u / m.radius) ** 2
    with np.errstate(divide="ignore"):
        return np.where(w2 < 1.0, m.log_peak + p * np.log1p(-np.minimum(w2, 1.0)), -np.inf)


def standard_pdf(u, rho):
    return np.exp(standard_logpdf(u, rho))


def logpdf(params, z):
    z = np.asarray(z, dtype=float)
    u = (z - params.mu) / params.sigma
    return np.sum(standard_logpdf(u, params.rho) - np.log(params.sigma), axis=-1)


def pdf(params, z):
    """Density at ``z`` (shape (..., D)); zero outside the support when rho > 1."""
    return np.exp(logpdf(params, z))


def support_radius(params, dim):
    """Half-width of the support interval along coordinate ``dim``; inf at rho = 1."""
    return float(params.sigma[dim] * standard_member(params.rho).radius)


def moments(params):
    """Per-coordinate mean and variance."""
    return params.mu.copy(), params.sigma ** 2 * standard_member(params.rho).variance


# -- sampling ---------------------------------------------------------------

@lru_cache(maxsize=None)
def _cdf_table(rho):
    m = standard_member(rho)
    knots = np.linspace(-m.radius, m.radius, CDF_KNOTS)
    x, w = np.polynomial.legendre.leggauss(8)
    lo, hi = knots[:-1], knots[1:]
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    pts = mid[:, None] + half[:, None] * x[None, :]
    pieces = half * (standard_pdf(pts, rho) @ w)
    cdf = np.concatenate([[0.0], np.cumsum(pieces)])
    if abs(cdf[-1] - 1.0) > 1e-8:
        raise NumericFailure(f"CDF table for rho={rho:g} integrates to {cdf[-1]:.12f}", residual=cdf[-1] - 1.0)
    return knots, cdf


def _partial_mass(a, b, rho):
    x, w = np.polynomial.legendre.leggauss(8)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    pts = mid[..., None] + half[..., None] * x
    return half * (standard_pdf(pts, rho) @ w)


def standard_cdf(u, rho):
    """CDF of the standard member (table plus one quadrature panel)."""
    m = standard_member(rho)
    u = np.asarray(u, dtype=float)
    if m.rho == 1.0:
        from scipy.special import ndtr

        return ndtr(u)
    knots, cdf = _cdf_table(m.rho)
    uc = np.clip(u, -m.radius, m.radius)
    j = np.clip(np.searchsorted(knots, uc, side="right") - 1, 0, len(knots) - 2)
    return np.clip(cdf[j] + _partial_mass(knots[j], uc, m.rho), 0.0, 1.0)


def standard_inverse_cdf(v, rho, tol=INVERSE_CDF_TOL, max_iter=100):
    """Quantile function of the standard member.

    Table lookup brackets the root between two knots; refinement takes Newton
    steps from the linear-interpolation guess and falls back to bisection
    whenever a step leaves the bracket.
    """
    m = standard_member(rho)
    v = np.asarray(v, dtype=float)
    if m.rho == 1.0:
        from scipy.special import ndtri

        return ndtri(v)
    knots, cdf = _cdf_table(m.rho)
    j = np.clip(np.searchsorted(cdf, v, side="right") - 1, 0, len(knots) - 2)
    lo, hi = knots[j].copy(), knots[j + 1].copy()
    base = cdf[j]
    width = np.maximum(cdf[j + 1] - base, np.finfo(float).tiny)
    x = lo + (hi - lo) * np.clip((v - base) / width, 0.0, 1.0)
    for _ in range(max_iter):
        resid = base + _partial_mass(knots[j], x, m.rho) - v
        done = np.abs(resid) <= tol
        if np.all(done | (hi - lo <= 1e-15 * m.radius)):
            break
        lo = np.where(resid < 0, x, lo)
        hi = np.where(resid < 0, hi, x)
        dens = standard_pdf(x, m.rho)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = x - resid / dens
        inside = (dens > 0) & (step > lo) & (step < hi)
        x = np.where(done, x, np.where(inside, step, 0.5 * (lo + hi)))
    return x


def sample_standard(rho, shape, rng):
    rho = _check_family_rho(rho)
    if rho == 1.0:
        return rng.standard_normal(shape)
    return standard_inverse_cdf(rng.random(shape), rho)


def sample(params, n, seed):
    """``n`` i.i.d. draws, shape (n, D), as mu + sigma * eps with eps from the standard member."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    eps = sample_standard(params.rho, (n, params.dim), rng)
    return params.mu + params.sigma * eps


# -- Fenchel-Young regularizer against the standard-normal score -------------

def _check_rho_reg(params, rho_reg):
    if _check_family_rho(rho_reg) != params.rho:
        raise ValueError(f"rho_reg={rho_reg} does not match the posterior family rho={params.rho}")


def _log_scale_term(sigma, rho):
    # (sigma^(1 - rho) - 1) / (rho (rho - 1)); tends to -log(sigma) as rho -> 1
    if rho == 1.0:
        return -np.log(sigma)
    return np.expm1((1.0 - rho) * np.log(sigma)) / (rho * (rho - 1.0))


def fy_regularizer_terms(mu, sigma, rho):
    """Per-coordinate FY loss L_Omega(eta_N(0,1); q) for arrays of locations/scales."""
    m = standard_member(rho)
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    # Omega*(eta) - E_q[eta] + Omega(q) with E_q[eta] = -(mu^2 + sigma^2 v) / 2 and
    # Omega(q) = (sigma^(1-rho) int f^rho - 1) / (rho (rho - 1))
    return (0.5 * mu * mu + 0.5 * m.variance * (sigma * sigma - 1.0)
            + m.power_integral * _log_scale_term(sigma, m.rho))


def fy_regularizer_grad_terms(mu, sigma, rho):
    m = standard_member(rho)
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    return mu.copy(), m.variance * sigma - (m.power_integral / m.rho) * sigma ** (-m.rho)


def fy_regularizer(params, prior=STANDARD_NORMAL, rho_reg=None):
    """FY loss of the posterior against the standard-normal score, summed over coordinates.

    Zero exactly at the standard member (mu = 0, sigma = 1); equals
    KL(q || N(0, I)) at rho = 1.
    """
    _check_rho_reg(params, params.rho if rho_reg is None else rho_reg)
    return float(np.sum(fy_regularizer_terms(params.mu, params.sigma, params.rho)))


def fy_regularizer_gradient(params, prior=STANDARD_NORMAL, rho_reg=None):
    """(d/d mu, d/d sigma) of ``fy_regularizer``."""
    _check_rho_reg(params, params.rho if rho_reg is None else rho_reg)
    return fy_regularizer_grad_terms(params.mu, params.sigma, params.rho)


def gaussian_kl(mu, sigma):
    """KL(N(mu, diag sigma^2) || N(0, I))."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    return float(np.sum(0.5 * (sigma ** 2 + mu ** 2 - 1.0 - 2.0 * np.log(sigma))))
