"""Clustering-quality metrics: adjusted mutual information, adjusted Rand index, silhouette."""
import numpy as np
from scipy.special import comb, gammaln


def contingency(pred, truth):
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise ValueError(f"label vectors must be 1-D and of equal length, got {pred.shape} and {truth.shape}")
    _, pi = np.unique(pred, return_inverse=True)
    _, ti = np.unique(truth, return_inverse=True)
    table = np.zeros((pi.max() + 1, ti.max() + 1), dtype=np.int64)
    np.add.at(table, (pi, ti), 1)
    return table


def is_degenerate(pred, truth):
    """True when either labelling puts every point in one cluster."""
    return len(np.unique(pred)) < 2 or len(np.unique(truth)) < 2


def _entropy(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def mutual_information(table):
    n = table.sum()
    a = table.sum(axis=1, keepdims=True)
    b = table.sum(axis=0, keepdims=True)
    nz = table > 0
    nij = table[nz]
    return float(np.sum(nij / n * (np.log(nij * n) - np.log((a @ b)[nz]))))


def expected_mutual_information(table):
    """E[MI] under the hypergeometric (fixed-marginals permutation) model."""
    n = int(table.sum())
    a = table.sum(axis=1)
    b = table.sum(axis=0)
    emi = 0.0
    lg_n = gammaln(n + 1)
    for ai in a:
        for bj in b:
            lo, hi = max(1, ai + bj - n), min(ai, bj)
            if lo > hi:
                continue
            nij = np.arange(lo, hi + 1)
            log_p = (gammaln(ai + 1) + gammaln(bj + 1) + gammaln(n - ai + 1) + gammaln(n - bj + 1)
                     - lg_n - gammaln(nij + 1) - gammaln(ai - nij + 1) - gammaln(bj - nij + 1)
                     - gammaln(n - ai - bj + nij + 1))
            term = nij / n * (np.log(n * nij) - np.log(ai * bj))
            emi += float(np.sum(term * np.exp(log_p)))
    return emi


def adjusted_mutual_information(pred, truth):
    """AMI with the arithmetic-mean normalization; 0 for single-cluster input."""
    table = contingency(pred, truth)
    if is_degenerate(pred, truth):
        return 0.0
    mi = mutual_information(table)
    emi = expected_mutual_information(table)
    h = 0.5 * (_entropy(table.sum(axis=1)) + _entropy(table.sum(axis=0)))
    denom = h - emi
    if abs(denom) < np.finfo(float).eps:
        return 0.0
    return (mi - emi) / denom


def adjusted_rand_index(pred, truth):
    """Hubert-Arabie adjusted Rand index; 0 for single-cluster input."""
    table = contingency(pred, truth)
    if is_degenerate(pred, truth):
        return 0.0
    n = table.sum()
    index = comb(table, 2).sum()
    sum_a = comb(table.sum(axis=1), 2).sum()
    sum_b = comb(table.sum(axis=0), 2).sum()
    expected = sum_a * sum_b / comb(n, 2)
    top = 0.5 * (sum_a + sum_b)
    if top == expected:
        return 0.0
    return float((index - expected) / (top - expected))


def silhouette_samples(x, labels):
    x = np.asarray(x, dtype=float)
    labels = np.asarray(labels)
    uniq, inv = np.unique(labels, return_inverse=True)
    if len(uniq) < 2:
        raise ValueError("silhouette needs at least two clusters")
    sq = np.sum(x * x, axis=1)
    dist = np.sqrt(np.maximum(sq[:, None] + sq[None, :] - 2 * x @ x.T, 0.0))
    np.fill_diagonal(dist, 0.0)
    counts = np.bincount(inv)
    # sums of distances from every point to every cluster
    sums = np.zeros((len(x), len(uniq)))
    for c in range(len(uniq)):
        sums[:, c] = dist[:, inv == c].sum(axis=1)
    own = counts[inv]
    a = sums[np.arange(len(x)), inv] / np.maximum(own - 1, 1)
    means = sums / counts
    means[np.arange(len(x)), inv] = np.inf
    b = means.min(axis=1)
    top = np.maximum(a, b)
    s = (b - a) / np.where(top > 0, top, 1.0)
    return np.where(own > 1, s, 0.0)


def silhouette_score(x, labels):
    """Mean silhouette with Euclidean distances; singleton-cluster points score 0."""
    return float(np.mean(silhouette_samples(x, labels)))
