"""Independent reference computations used as test oracles.

Nothing here imports from ``fyvi``: each routine re-derives its quantity
from first principles so it can check the library path it shadows.
"""
import numpy as np


def project_rows(v):
    """Euclidean simplex projection (Duchi et al. style), written independently."""
    v = np.atleast_2d(v)
    n, k = v.shape
    out = np.empty_like(v)
    for i in range(n):
        u = sorted(v[i], reverse=True)
        total, theta = 0.0, 0.0
        for j, uj in enumerate(u, start=1):
            total += uj
            t = (total - 1.0) / j
            if uj - t > 0:
                theta = t
        out[i] = np.maximum(v[i] - theta, 0.0)
    return out


def project_rows_fast(v):
    # vectorized variant for the long projected-gradient loops
    k = v.shape[1]
    u = np.sort(v, axis=1)[:, ::-1]
    css = np.cumsum(u, axis=1) - 1.0
    idx = np.arange(1, k + 1)
    ok = u - css / idx > 0
    r = k - np.argmax(ok[:, ::-1], axis=1)
    theta = css[np.arange(len(v)), r - 1] / r
    return np.maximum(v - theta[:, None], 0.0)


def tsallis_grad(q, rho):
    if rho == 1.0:
        return np.log(np.maximum(q, 1e-300)) + 1.0
    return (rho * np.power(np.maximum(q, 0.0), rho - 1.0) - 1.0) / (rho * (rho - 1.0))


def projected_gradient_fyvi(eta, loss, rho, iters=100_000, step=1e-3):
    """Minimize <q, loss - eta> + Omega_rho(q) over the simplex, row-wise.

    This equals E_q[loss] + L_Omega(eta; q) up to the q-independent Omega*(eta).
    """
    eta = np.atleast_2d(eta)
    loss = np.atleast_2d(loss)
    q = np.full(eta.shape, 1.0 / eta.shape[1])
    lin = loss - eta
    for _ in range(iters):
        q = project_rows_fast(q - step * (lin + tsallis_grad(q, rho)))
    return q


def kl(q, p):
    q = np.asarray(q)
    p = np.asarray(p)
    mask = q > 0
    return float(np.sum(q[mask] * (np.log(q[mask]) - np.log(p[mask]))))


def softmax(x):
    e = np.exp(x - np.max(x))
    return e / e.sum()


def central_difference(f, x, h=1e-5):
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp = x.copy()
        xm = x.copy()
        xp[idx] += h
        xm[idx] -= h
        g[idx] = (f(xp) - f(xm)) / (2 * h)
    return g


def rel_error(a, b, floor=1e-8):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))


def gaussian_logpdf(x, mean, cov):
    d = x.shape[1]
    diff = x - mean
    inv = np.linalg.inv(cov)
    _, logdet = np.linalg.slogdet(cov)
    maha = np.einsum("ij,jk,ik->i", diff, inv, diff)
    return -0.5 * (d * np.log(2 * np.pi) + logdet + maha)


def classical_em(x, means, covs, weights, iters, jitter=1e-6):
    """Textbook EM for a Gaussian mixture; returns the per-iteration history.

    Each history entry holds the responsibilities computed in that
    iteration's E-step and the parameters produced by its M-step.
    """
    n, d = x.shape
    k = len(weights)
    means = np.array(means, dtype=float)
    covs = np.array(covs, dtype=float)
    weights = np.array(weights, dtype=float)
    history = []
    for _ in range(iters):
        logp = np.column_stack([np.log(weights[j]) + gaussian_logpdf(x, means[j], covs[j])
                                for j in range(k)])
        logp -= logp.max(axis=1, keepdims=True)
        r = np.exp(logp)
        r /= r.sum(axis=1, keepdims=True)
        nk = r.sum(axis=0)
        weights = nk / n
        means = (r.T @ x) / nk[:, None]
        covs = np.stack([
            ((r[:, j, None] * (x - means[j])).T @ (x - means[j])) / nk[j] + jitter * np.eye(d)
            for j in range(k)
        ])
        history.append({"resp": r, "weights": weights, "means": means, "covs": covs})
    return history


def classification_em(x, means, covs, weights, iters, jitter=1e-6):
    """Celeux-Govaert classification EM with argmax assignment; returns labels per iteration."""
    n, d = x.shape
    k = len(weights)
    means = np.array(means, dtype=float)
    covs = np.array(covs, dtype=float)
    weights = np.array(weights, dtype=float)
    labels_hist = []
    for _ in range(iters):
        with np.errstate(divide="ignore"):
            score = np.column_stack([np.log(weights[j]) + gaussian_logpdf(x, means[j], covs[j])
                                     for j in range(k)])
        labels = np.argmax(score, axis=1)
        labels_hist.append(labels)
        for j in range(k):
            members = x[labels == j]
            if len(members) == 0:
                continue
            means[j] = members.mean(axis=0)
            diff = members - means[j]
            covs[j] = diff.T @ diff / len(members) + jitter * np.eye(d)
        counts = np.bincount(labels, minlength=k).astype(float)
        weights = np.maximum(counts / n, 1e-10)
    return labels_hist
