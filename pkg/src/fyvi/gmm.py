"""Fenchel-Young EM for Gaussian mixtures.

One regularizer covers three algorithms: Shannon (rho = 1) is textbook EM,
Tsallis rho > 1 gives sparse responsibilities, and the zero regularizer gives
classification (hard) EM.  The objective tracked by ``fit`` is the FY
variational free energy

    F(q, theta, eta) = sum_i E_{q_i}[-log N(x_i; mu_Z, Sigma_Z)] + L_Omega(eta; q_i).
"""
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .errors import CovarianceError, FormatError
from .simplex import SHANNON, Regularizer, fy_loss, prediction_map, support_size

JITTER = 1e-6
EMPTY_MASS = 1e-10
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 200


@dataclass(frozen=True, eq=False)
class GmmState:
    eta: np.ndarray          # (K,) prior scores
    means: np.ndarray        # (K, D)
    covariances: np.ndarray  # (K, D, D)
    omega: Regularizer = SHANNON

    @property
    def n_components(self):
        return self.means.shape[0]

    @property
    def dim(self):
        return self.means.shape[1]


@dataclass(frozen=True)
class InitSpec:
    """Means uniform on [low, high]^D, identity covariances, uniform prior scores."""

    seed: int = 0
    low: float = 0.0
    high: float = 0.1


@dataclass
class FitResult:
    state: GmmState
    resp: np.ndarray
    trace: list = field(default_factory=list)

    @property
    def n_iter(self):
        return len(self.trace)


def _as_data(x):
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"data must be an N x D matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("data must be finite")
    return x


def init_state(x, k, omega=SHANNON, init=InitSpec()):
    x = _as_data(x)
    rng = np.random.default_rng(init.seed)
    d = x.shape[1]
    means = rng.uniform(init.low, init.high, size=(k, d))
    covs = np.broadcast_to(np.eye(d), (k, d, d)).copy()
    return GmmState(np.zeros(k), means, covs, omega)


def mixing_proportions(state):
    """pi = prediction_map(eta, omega)."""
    return prediction_map(state.eta, state.omega)


def prior_scores(state):
    """Per-component prior term of the E-step score.

    eta itself for Shannon and the zero regularizer; pi**(rho-1) / (rho-1)
    with pi the mixing proportions for other Tsallis indices.
    """
    if state.omega.is_zero or state.omega.is_shannon:
        return state.eta
    r1 = state.omega.rho - 1.0
    return mixing_proportions(state) ** r1 / r1


def log_densities(x, means, covariances):
    """(N, K) matrix of log N(x_i; mu_k, Sigma_k) via Cholesky factors."""
    x = _as_data(x)
    n, d = x.shape
    out = np.empty((n, len(means)))
    for k, (mu, cov) in enumerate(zip(means, covariances)):
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise CovarianceError(k) from None
        diag = np.diag(chol)
        if not np.all(diag > 0) or not np.all(np.isfinite(diag)):
            raise CovarianceError(k)
        sol = solve_triangular(chol, (x - mu).T, lower=True, check_finite=False)
        with np.errstate(over="ignore"):
            out[:, k] = -0.5 * (d * np.log(2 * np.pi) + np.sum(sol * sol, axis=0)) - np.sum(np.log(diag))
    return out


def e_step(state, x):
    """Responsibilities: row i = prediction_map(prior_score + log N(x_i; .), omega)."""
    logp = log_densities(x, state.means, state.covariances)
    return prediction_map(prior_scores(state) + logp, state.omega)


def canonical_eta(qbar, omega):
    """A score vector whose prediction map is ``qbar``.

    log(qbar) for Shannon and the zero regularizer, qbar**(rho-1) / (rho-1)
    for other Tsallis indices (qbar itself at rho = 2).
    """
    if omega.is_zero or omega.is_shannon:
        return np.log(qbar)
    r1 = omega.rho - 1.0
    return qbar ** r1 / r1


def m_step(x, resp, omega, previous=None, jitter=JITTER):
    """Weighted maximum likelihood for (means, covariances) plus the eta-update.

    Components whose responsibility mass falls below ``EMPTY_MASS`` keep their
    previous parameters (global moments if there is no previous state) and get
    their average responsibility floored at ``EMPTY_MASS``.
    """
    x = _as_data(x)
    resp = np.asarray(resp, dtype=float)
    n, d = x.shape
    k = resp.shape[1]
    if resp.shape[0] != n:
        raise ValueError(f"responsibilities have {resp.shape[0]} rows for {n} samples")
    mass = resp.sum(axis=0)
    means = np.empty((k, d))
    covs = np.empty((k, d, d))
    eye = np.eye(d)
    for j in range(k):
        if mass[j] < EMPTY_MASS:
            if previous is not None:
                means[j], covs[j] = previous.means[j], previous.covariances[j]
            else:
                means[j] = x.mean(axis=0)
                covs[j] = np.atleast_2d(np.cov(x.T, bias=True)) + jitter * eye
            continue
        w = resp[:, j]
        means[j] = w @ x / mass[j]
        diff = x - means[j]
        covs[j] = (w[:, None] * diff).T @ diff / mass[j] + jitter * eye
        covs[j] = 0.5 * (covs[j] + covs[j].T)
    qbar = np.maximum(mass / n, EMPTY_MASS)
    return GmmState(canonical_eta(qbar, omega), means, covs, omega)


def expected_loss(resp, logp):
    # support-restricted sum so that 0 * inf contributes nothing
    pos = resp > 0
    return float(-np.sum(resp[pos] * logp[pos]))


def fyvfe(state, x, resp):
    """FY variational free energy of responsibilities ``resp`` under ``state`` (beta = 1)."""
    resp = np.asarray(resp, dtype=float)
    logp = log_densities(x, state.means, state.covariances)
    if resp.shape != logp.shape:
        raise ValueError(f"responsibilities shape {resp.shape} does not match {logp.shape}")
    reg = fy_loss(np.broadcast_to(state.eta, resp.shape), resp, state.omega)
    return expected_loss(resp, logp) + float(np.sum(reg))


def fit(x, k, omega=SHANNON, init=InitSpec(), max_iter=DEFAULT_MAX_ITER, tol=DEFAULT_TOL,
        state=None, callback=None):
    """Alternate e_step / m_step, recording the FYVFE after each M-step.

    Stops once |change| < tol or after max_iter iterations.  ``state`` overrides
    the random initialization.
    """
    x = _as_data(x)
    if k < 1 or max_iter < 1:
        raise ValueError("k and max_iter must be at least 1")
    if x.shape[0] < k:
        raise ValueError(f"need at least k={k} samples, got {x.shape[0]}")
    if state is None:
        state = init_state(x, k, omega, init)
    trace = []
    resp = None
    for it in range(max_iter):
        resp = e_step(state, x)
        state = m_step(x, resp, omega, previous=state)
        trace.append(fyvfe(state, x, resp))
        if callback is not None:
            callback(it, state, resp)
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) < tol:
            break
    return FitResult(state, resp, trace)


def e_step_sparsity(resp):
    """Mean number of components with zero responsibility per row."""
    resp = np.atleast_2d(resp)
    return float(np.mean(resp.shape[1] - support_size(resp)))


def hard_labels(resp):
    """Argmax of each row, ties to the lowest index."""
    return np.argmax(np.asarray(resp), axis=1)


# -- checkpoints ------------------------------------------------------------

CHECKPOINT_FORMAT = "fyvi-gmm-checkpoint"
CHECKPOINT_VERSION = 1


def state_to_dict(state):
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "n_components": state.n_components,
        "dim": state.dim,
        "regularizer": "zero" if state.omega.is_zero else state.omega.rho,
        "eta": state.eta.tolist(),
        "means": state.means.tolist(),
        # each covariance flattened row-major
        "covariances": [c.ravel().tolist() for c in state.covariances],
    }


def state_from_dict(obj):
    if obj.get("format") != CHECKPOINT_FORMAT:
        raise FormatError(f"not a GMM checkpoint (format={obj.get('format')!r})")
    try:
        k, d = int(obj["n_components"]), int(obj["dim"])
        reg = obj["regularizer"]
        omega = Regularizer.zero() if reg == "zero" else Regularizer(float(reg))
        eta = np.asarray(obj["eta"], dtype=float).reshape(k)
        means = np.asarray(obj["means"], dtype=float).reshape(k, d)
        covs = np.asarray(obj["covariances"], dtype=float).reshape(k, d, d)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed GMM checkpoint: {exc}") from None
    return GmmState(eta, means, covs, omega)


def save_checkpoint(state, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(state_to_dict(state), fh, indent=2)
        fh.write("\n")


def load_checkpoint(path):
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"checkpoint is not valid JSON: {exc.msg}", offset=exc.pos) from None
    return state_from_dict(obj)
