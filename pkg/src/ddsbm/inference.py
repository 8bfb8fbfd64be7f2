"""Posterior summaries under 0-1 loss, clustering accuracy and the distance
diagnostics that link contraction in theta to recovery."""
from __future__ import annotations

import math
from collections import Counter
from collections.abc import Sequence

import numpy as np

from .identify import _check_theta, sup_norm  # noqa: F401  (re-exported)
from .model import Assignment


def _labels(Z) -> np.ndarray:
    return Z.labels if isinstance(Z, Assignment) else np.asarray(Z)


def effective_k(Z) -> int:
    """Number of non-empty communities."""
    return int(np.unique(_labels(Z)).size)


def canonical_labels(Z) -> np.ndarray:
    """Relabel by order of first appearance, starting at 0."""
    labels = _labels(Z)
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(first.size, dtype=np.int64)
    rank[np.argsort(first)] = np.arange(first.size)
    return rank[inverse]


def partition_key(Z) -> bytes:
    """Hashable key identifying Z up to label permutation (i.e. by Z Z^T)."""
    return canonical_labels(Z).astype(np.int32).tobytes()


def _trace_labels(trace) -> np.ndarray:
    z = trace.z if hasattr(trace, "z") else np.asarray(trace)
    if len(z) == 0:
        raise ValueError("trace is empty")
    return z


def posterior_mode_k(trace) -> int:
    """Most frequent effective K; ties go to the smaller K.

    Accepts a ``Trace`` or a plain sequence of effective K values.
    """
    ks = trace.k_eff if hasattr(trace, "k_eff") else trace
    if len(ks) == 0:
        raise ValueError("trace is empty")
    counts = Counter(int(k) for k in ks)
    return min(counts, key=lambda k: (-counts[k], k))


def posterior_mode_z(trace) -> Assignment:
    """Modal partition class; ties go to the class seen first."""
    z = _trace_labels(trace)
    counts: Counter[bytes] = Counter()
    first: dict[bytes, int] = {}
    for idx, row in enumerate(z):
        key = partition_key(row)
        counts[key] += 1
        first.setdefault(key, idx)
    best = min(counts, key=lambda key: (-counts[key], first[key]))
    return Assignment(canonical_labels(z[first[best]]))


def _comb2(x):
    x = np.asarray(x, dtype=np.float64)
    return x * (x - 1.0) / 2.0


def adjusted_rand_index(Z1, Z2) -> float:
    """Hubert-Arabie adjusted Rand index from the pair contingency table."""
    a, b = _labels(Z1), _labels(Z2)
    if a.size != b.size:
        raise ValueError("assignments differ in length")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1))
    np.add.at(table, (ia, ib), 1.0)
    index = _comb2(table).sum()
    rows = _comb2(table.sum(axis=1)).sum()
    cols = _comb2(table.sum(axis=0)).sum()
    total = _comb2(a.size)
    expected = rows * cols / total if total > 0 else 0.0
    max_index = 0.5 * (rows + cols)
    if max_index == expected:
        return 1.0
    return float((index - expected) / (max_index - expected))


def mean_ari(trace, z0) -> float:
    """Mean ARI between each retained draw and ``z0``."""
    z = _trace_labels(trace)
    cache: dict[bytes, float] = {}
    total = 0.0
    for row in z:
        key = partition_key(row)
        val = cache.get(key)
        if val is None:
            val = cache[key] = adjusted_rand_index(row, z0)
        total += val
    return total / len(z)


def bias_rmse(estimates: Sequence[float], k0: float) -> tuple[float, float]:
    est = np.asarray(estimates, dtype=float)
    if est.size == 0:
        raise ValueError("no estimates")
    err = est - k0
    return float(err.mean()), float(math.sqrt(np.mean(err ** 2)))


def _pairs(theta0, theta1) -> tuple[np.ndarray, np.ndarray]:
    t0, t1 = _check_theta(theta0), _check_theta(theta1)
    if t0.shape != t1.shape:
        raise ValueError("theta matrices differ in dimension")
    iu = np.triu_indices(t0.shape[0], 1)
    return t0[iu], t1[iu]


def hellinger(theta0, theta1) -> float:
    """Hellinger distance between the product Bernoulli laws of two thetas.

    H^2 = 2 - 2 prod_{i<j} (1 - h_ij^2 / 2), with the per-pair
    h^2 = ((sqrt p - sqrt q)^2 + (sqrt(1-p) - sqrt(1-q))^2) / 2.
    """
    p, q = _pairs(theta0, theta1)
    h2 = 0.5 * ((np.sqrt(p) - np.sqrt(q)) ** 2 + (np.sqrt(1 - p) - np.sqrt(1 - q)) ** 2)
    H2 = -2.0 * math.expm1(float(np.sum(np.log1p(-0.5 * h2))))
    return math.sqrt(max(H2, 0.0))


def kl_product_bernoulli(theta0, theta1) -> float:
    """KL(P_theta0 || P_theta1) summed over pairs; +inf without absolute continuity."""
    p, q = _pairs(theta0, theta1)
    total = 0.0
    with np.errstate(divide="ignore"):
        for x, y in ((p, q), (1.0 - p, 1.0 - q)):
            pos = x > 0
            if np.any(y[pos] <= 0):
                return math.inf
            total += float(np.sum(x[pos] * (np.log(x[pos]) - np.log(y[pos]))))
    return max(total, 0.0)
