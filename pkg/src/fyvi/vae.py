"""A small Fenchel-Young beta-VAE with hand-written backpropagation.

Encoder: x -> relu -> relu -> (mu, log sigma).  Decoder: z -> relu -> relu ->
per-pixel scores theta.  Each pixel is a distribution over {0, 1} with class
scores (theta, 0), so the observation model is Bernoulli-sigmoid at
rho_obs = 1 and two-class sparsemax at rho_obs = 2.  The posterior is a
diagonal (2 - rho)-Gaussian reparametrized as z = mu + sigma * eps.

Per-datum objective:

    sum_pixels L_Psi(theta(z); x) + beta * L_Omega(eta_N(0,I); q(x))
"""
import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import expit, xlogy

from . import betagauss
from .errors import NumericFailure

LAYERS = ("W1", "b1", "W2", "b2", "Wmu", "bmu", "Wls", "bls", "V1", "c1", "V2", "c2", "V3", "c3")
DIVERGENCE_LIMIT = 1e6


@dataclass(frozen=True)
class VaeConfig:
    input_dim: int = 64
    hidden_dims: tuple = (32, 16)
    latent_dim: int = 4
    rho_posterior: float = 1.0
    rho_obs: float = 1.0
    beta: float = 0.01
    learning_rate: float = 0.02
    batch_size: int = 32
    epochs: int = 200
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        counts = (self.input_dim, self.latent_dim, self.batch_size, self.epochs) + self.hidden_dims
        if len(self.hidden_dims) != 2 or min(counts) < 1:
            raise ValueError("counts must be >= 1 and hidden_dims must have two entries")
        object.__setattr__(self, "rho_posterior", float(self.rho_posterior))
        object.__setattr__(self, "rho_obs", float(self.rho_obs))
        if self.rho_posterior not in (1.0, 1.5, 2.0):
            raise ValueError(f"rho_posterior must be 1, 1.5 or 2, got {self.rho_posterior}")
        if self.rho_obs not in (1.0, 2.0):
            raise ValueError(f"rho_obs must be 1 or 2, got {self.rho_obs}")
        if not (self.beta > 0 and self.learning_rate > 0):
            raise ValueError("beta and learning_rate must be positive")


class TrainingDiverged(NumericFailure):
    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


def _shapes(config):
    d, (h1, h2), k = config.input_dim, config.hidden_dims, config.latent_dim
    return {
        "W1": (d, h1), "b1": (h1,), "W2": (h1, h2), "b2": (h2,),
        "Wmu": (h2, k), "bmu": (k,), "Wls": (h2, k), "bls": (k,),
        "V1": (k, h2), "c1": (h2,), "V2": (h2, h1), "c2": (h1,), "V3": (h1, d), "c3": (d,),
    }


def init_params(config, seed=None):
    """Weights uniform in +-1/sqrt(fan_in), zero biases (so log sigma starts near 0)."""
    rng = np.random.default_rng(config.seed if seed is None else seed)
    params = {}
    for name, shape in _shapes(config).items():
        if len(shape) == 2:
            bound = 1.0 / np.sqrt(shape[0])
            params[name] = rng.uniform(-bound, bound, size=shape)
        else:
            params[name] = np.zeros(shape)
    return params


# -- binary Fenchel-Young observation losses --------------------------------

def binary_prediction(theta, rho_obs):
    """Probability of pixel value 1 under class scores (theta, 0)."""
    if rho_obs == 1.0:
        return expit(theta)
    return np.clip(0.5 * (theta + 1.0), 0.0, 1.0)


def binary_fy_loss(theta, x, rho_obs):
    """Elementwise FY loss of scores (theta, 0) against the target (x, 1 - x)."""
    if rho_obs == 1.0:
        conj = np.logaddexp(0.0, theta)
        neg = xlogy(x, x) + xlogy(1 - x, 1 - x)
    else:
        p = binary_prediction(theta, rho_obs)
        conj = p * theta - 0.5 * (p * p + (1 - p) ** 2 - 1)
        neg = 0.5 * (x * x + (1 - x) ** 2 - 1)
    return conj - x * theta + neg


def _relu(a):
    return np.maximum(a, 0.0)


def encode(params, x):
    h1 = _relu(x @ params["W1"] + params["b1"])
    h2 = _relu(h1 @ params["W2"] + params["b2"])
    return h2 @ params["Wmu"] + params["bmu"], h2 @ params["Wls"] + params["bls"], (h1, h2)


def decode(params, z):
    g1 = _relu(z @ params["V1"] + params["c1"])
    g2 = _relu(g1 @ params["V2"] + params["c2"])
    return g2 @ params["V3"] + params["c3"], (g1, g2)


def reconstruct(params, x, config):
    """Decoded mean reconstruction: pixel probabilities at z = mu."""
    mu, _, _ = encode(params, x)
    theta, _ = decode(params, mu)
    return binary_prediction(theta, config.rho_obs)


def sample_eps(config, n, rng):
    return betagauss.sample_standard(config.rho_posterior, (n, config.latent_dim), rng)


def fyelbo_loss(params, batch, config, seed=None, eps=None, parts=False):
    """Batch-mean FY free energy and its gradients (dict shaped like ``params``).

    ``eps`` fixes the reparametrization noise; otherwise it is drawn from ``seed``.
    With ``parts=True`` also returns the batch-mean reconstruction and
    regularizer terms.
    """
    x = np.asarray(batch, dtype=float)
    if np.any(x < 0) or np.any(x > 1):
        raise ValueError("batch entries must lie in [0, 1]")
    b = x.shape[0]
    if eps is None:
        eps = sample_eps(config, b, np.random.default_rng(seed))
    # overflow surfaces below as a non-finite term
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        mu, log_sigma, (h1, h2) = encode(params, x)
        sigma = np.exp(log_sigma)
        z = mu + sigma * eps
        theta, (g1, g2) = decode(params, z)
        recon = binary_fy_loss(theta, x, config.rho_obs).sum(axis=1)
        reg = betagauss.fy_regularizer_terms(mu, sigma, config.rho_posterior).sum(axis=1)
    for name, term in (("reconstruction", recon), ("regularizer", reg)):
        if not np.all(np.isfinite(term)):
            raise NumericFailure(f"non-finite {name} term in the FY objective")
    loss = float(np.mean(recon + config.beta * reg))

    grads = {}
    d_theta = (binary_prediction(theta, config.rho_obs) - x) / b
    grads["V3"] = g2.T @ d_theta
    grads["c3"] = d_theta.sum(axis=0)
    d_a = (d_theta @ params["V3"].T) * (g2 > 0)
    grads["V2"] = g1.T @ d_a
    grads["c2"] = d_a.sum(axis=0)
    d_a = (d_a @ params["V2"].T) * (g1 > 0)
    grads["V1"] = z.T @ d_a
    grads["c1"] = d_a.sum(axis=0)
    d_z = d_a @ params["V1"].T

    g_mu, g_sigma = betagauss.fy_regularizer_grad_terms(mu, sigma, config.rho_posterior)
    d_mu = d_z + config.beta * g_mu / b
    d_log_sigma = (d_z * eps + config.beta * g_sigma / b) * sigma
    grads["Wmu"] = h2.T @ d_mu
    grads["bmu"] = d_mu.sum(axis=0)
    grads["Wls"] = h2.T @ d_log_sigma
    grads["bls"] = d_log_sigma.sum(axis=0)
    d_a = (d_mu @ params["Wmu"].T + d_log_sigma @ params["Wls"].T) * (h2 > 0)
    grads["W2"] = h1.T @ d_a
    grads["b2"] = d_a.sum(axis=0)
    d_a = (d_a @ params["W2"].T) * (h1 > 0)
    grads["W1"] = x.T @ d_a
    grads["b1"] = d_a.sum(axis=0)
    if parts:
        return loss, grads, float(recon.mean()), float(reg.mean())
    return loss, grads


def recon_l1(params, x, config):
    """Mean absolute difference between inputs and decoded mean reconstructions."""
    return float(np.mean(np.abs(x - reconstruct(params, x, config))))


@dataclass
class EpochStats:
    epoch: int
    mean_loss: float
    recon_l1: float
    regularizer: float
    gaussian_kl: float


def train(config, dataset, callback=None):
    """Plain SGD over shuffled mini-batches, one noise draw per datum per step.

    Returns (params, trace of EpochStats, final recon_l1).
    """
    x = np.asarray(dataset, dtype=float)
    if x.ndim != 2 or x.shape[1] != config.input_dim:
        raise ValueError(f"dataset must be N x {config.input_dim}, got {x.shape}")
    if np.any(x < 0) or np.any(x > 1):
        raise ValueError("dataset entries must lie in [0, 1]")
    params = init_params(config)
    rng = np.random.default_rng([config.seed, 1])
    n = x.shape[0]
    trace = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total, reg_total, kl_total = 0.0, 0.0, 0.0
        for start in range(0, n, config.batch_size):
            batch = x[order[start:start + config.batch_size]]
            eps = sample_eps(config, len(batch), rng)
            try:
                loss, grads, _, reg = fyelbo_loss(params, batch, config, eps=eps, parts=True)
            except NumericFailure as exc:
                raise TrainingDiverged(f"training diverged at epoch {epoch}: {exc}", trace) from None
            if not np.isfinite(loss) or loss > DIVERGENCE_LIMIT:
                raise TrainingDiverged(f"training diverged at epoch {epoch} (loss {loss:.3e})", trace)
            total += loss * len(batch)
            reg_total += reg * len(batch)
            mu, log_sigma, _ = encode(params, batch)
            kl_total += sum(betagauss.gaussian_kl(m, s) for m, s in zip(mu, np.exp(log_sigma)))
            for name in LAYERS:
                params[name] -= config.learning_rate * grads[name]
        stats = EpochStats(epoch, total / n, recon_l1(params, x, config), reg_total / n, kl_total / n)
        trace.append(stats)
        if callback is not None:
            callback(stats)
    return params, trace, trace[-1].recon_l1


# -- synthetic data -----------------------------------------------------------

GLYPHS = (
    ["........",
     "..####..",
     ".#....#.",
     ".#....#.",
     ".#....#.",
     ".#....#.",
     "..####..",
     "........"],
    ["........",
     "...##...",
     "..###...",
     "...##...",
     "...##...",
     "...##...",
     "..####..",
     "........"],
    ["........",
     ".######.",
     "......#.",
     "..####..",
     ".#......",
     ".#......",
     ".######.",
     "........"],
    ["........",
     ".#....#.",
     ".#....#.",
     ".######.",
     "......#.",
     "......#.",
     "......#.",
     "........"],
)
FLIP_RATE = 0.05


def glyph_masks():
    return np.array([[[c == "#" for c in row] for row in g] for g in GLYPHS], dtype=float)


def interior_mask(size=8):
    m = np.zeros((size, size), dtype=bool)
    m[1:-1, 1:-1] = True
    return m


def make_synthetic_digits(n, seed=0, return_labels=False):
    """n x 64 binary images: one of four glyphs with 5% of interior pixels flipped.

    Border pixels are zero in every image.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, len(GLYPHS), size=n)
    imgs = glyph_masks()[labels]
    flips = (rng.random(imgs.shape) < FLIP_RATE) & interior_mask()
    imgs = np.where(flips, 1.0 - imgs, imgs).reshape(n, -1)
    return (imgs, labels) if return_labels else imgs


# -- checkpoints ----------------------------------------------------------------

CHECKPOINT_FORMAT = "fyvi-vae-checkpoint"


def save_checkpoint(params, config, path):
    obj = {
        "format": CHECKPOINT_FORMAT,
        "version": 1,
        "config": asdict(config),
        "params": {k: {"shape": list(v.shape), "values": v.ravel().tolist()} for k, v in params.items()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh)
        fh.write("\n")


def load_checkpoint(path):
    from .errors import FormatError

    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    if obj.get("format") != CHECKPOINT_FORMAT:
        raise FormatError(f"not a VAE checkpoint (format={obj.get('format')!r})")
    config = VaeConfig(**obj["config"])
    params = {k: np.asarray(v["values"], dtype=float).reshape(v["shape"]) for k, v in obj["params"].items()}
    return params, config


def write_trace_csv(trace, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,mean_loss,recon_l1,regularizer,gaussian_kl\n")
        for s in trace:
            fh.write(f"{s.epoch},{s.mean_loss!r},{s.recon_l1!r},{s.regularizer!r},{s.gaussian_kl!r}\n")
