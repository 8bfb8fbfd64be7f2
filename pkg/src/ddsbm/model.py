"""Parameter types and the unnormalized log posterior of the
diagonally dominant stochastic block model.

Labels are stored 0-based internally; ``Assignment.from_labels`` and
``Assignment.one_based`` convert at the boundaries.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, logsumexp, xlogy


class LabelError(ValueError):
    """Raised when an assignment label falls outside its declared range."""


def _dense(A) -> np.ndarray:
    return np.asarray(getattr(A, "dense", A))


class Assignment:
    """Community labels for ``n`` nodes with ``k`` declared communities.

    Empty communities are allowed, so ``k`` may exceed the number of
    distinct labels in use.
    """

    __slots__ = ("labels", "k")

    def __init__(self, labels, k: int | None = None):
        labels = np.array(labels, dtype=np.int64)
        if labels.ndim != 1:
            raise ValueError("labels must be one-dimensional")
        if k is None:
            k = int(labels.max()) + 1 if labels.size else 1
        if labels.size and (labels.min() < 0 or labels.max() >= k):
            raise LabelError(f"labels must lie in [0, {k})")
        labels.setflags(write=False)
        self.labels = labels
        self.k = int(k)

    @classmethod
    def from_labels(cls, labels, k: int | None = None, base: int = 1) -> "Assignment":
        """Build from labels numbered from ``base`` (1 by default)."""
        arr = np.asarray(labels, dtype=np.int64) - base
        return cls(arr, k)

    @property
    def n(self) -> int:
        return int(self.labels.size)

    @property
    def block_sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)

    def one_based(self) -> list[int]:
        return [int(v) + 1 for v in self.labels]

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other) -> bool:
        if not isinstance(other, Assignment):
            return NotImplemented
        return self.k == other.k and np.array_equal(self.labels, other.labels)

    __hash__ = None

    def __repr__(self) -> str:
        return f"Assignment({self.one_based()}, k={self.k})"


def check_connectivity(P) -> np.ndarray:
    """Validate a symmetric K x K matrix of probabilities."""
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("connectivity matrix must be square")
    if not np.allclose(P, P.T, rtol=0.0, atol=0.0):
        raise ValueError("connectivity matrix must be symmetric")
    if np.any(P < 0.0) or np.any(P > 1.0):
        raise ValueError("connectivity entries must lie in [0, 1]")
    return P


@dataclass(frozen=True)
class Hyperparams:
    """Prior settings: dominance gap, truncation of K, Poisson rate."""

    delta_n: float
    k_max: int
    lam: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.delta_n < 1.0:
            raise ValueError("delta_n must lie in [0, 1)")
        if self.k_max < 1:
            raise ValueError("k_max must be at least 1")
        if self.lam <= 0.0:
            raise ValueError("lambda must be positive")

    @classmethod
    def default(cls, n: int, delta_n: float | None = None,
                k_max: int | None = None, lam: float = 1.0) -> "Hyperparams":
        if delta_n is None:
            delta_n = min(0.05, math.log(n) / n)
        if k_max is None:
            k_max = max(1, math.isqrt(n))
        return cls(float(delta_n), int(k_max), float(lam))


def pair_counts(sizes) -> np.ndarray:
    """Number of node pairs per block: n_a(n_a-1)/2 on the diagonal, n_a n_b off it."""
    s = np.asarray(sizes, dtype=np.int64)
    npairs = np.outer(s, s)
    np.fill_diagonal(npairs, s * (s - 1) // 2)
    return npairs


@dataclass(frozen=True)
class BlockStats:
    """Edge counts ``O`` and pair counts ``npairs`` per block (both symmetric)."""

    O: np.ndarray
    npairs: np.ndarray

    @property
    def k(self) -> int:
        return self.O.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, BlockStats):
            return NotImplemented
        return np.array_equal(self.O, other.O) and np.array_equal(self.npairs, other.npairs)

    __hash__ = None

    def after_move(self, A, Z: Assignment, node: int, label: int) -> "BlockStats":
        """Stats after relabelling ``node`` to ``label``, updated incrementally."""
        O = self.O.copy()
        sizes = Z.block_sizes
        e = neighbour_counts(_dense(A), Z.labels, node, Z.k)
        move_node_inplace(O, sizes, e, int(Z.labels[node]), label)
        return BlockStats(O, pair_counts(sizes))


def neighbour_counts(dense: np.ndarray, labels: np.ndarray, node: int, k: int) -> np.ndarray:
    """Edges from ``node`` into each community."""
    return np.bincount(labels, weights=dense[node], minlength=k).astype(np.int64)


def move_node_inplace(O: np.ndarray, sizes: np.ndarray, e: np.ndarray, a: int, b: int) -> None:
    """Move one node with community edge counts ``e`` from block a to block b.

    ``e`` must be measured before the move; the node's own entry does not
    contribute because the adjacency diagonal is zero.
    """
    if a == b:
        return
    O[a, :] -= e
    O[:, a] -= e
    O[a, a] += e[a]
    O[b, :] += e
    O[:, b] += e
    O[b, b] -= e[b]
    sizes[a] -= 1
    sizes[b] += 1


def block_stats(A, Z: Assignment) -> BlockStats:
    dense = _dense(A)
    n = dense.shape[0]
    if Z.n != n:
        raise ValueError(f"assignment has {Z.n} labels for a {n}-node network")
    onehot = np.zeros((n, Z.k))
    onehot[np.arange(n), Z.labels] = 1.0
    M = onehot.T @ dense @ onehot
    O = np.rint(M).astype(np.int64)
    O[np.diag_indices(Z.k)] //= 2
    return BlockStats(O, pair_counts(Z.block_sizes))


@lru_cache(maxsize=64)
def triu_idx(k: int, offset: int = 0) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(k, offset)


def _upper(M: np.ndarray) -> np.ndarray:
    return M[triu_idx(M.shape[0])]


def log_likelihood(stats: BlockStats, P) -> float:
    """Bernoulli block log likelihood with the convention 0 log 0 = 0."""
    P = np.asarray(P, dtype=float)
    if P.shape != stats.O.shape:
        raise ValueError("connectivity matrix and block stats disagree in size")
    O = _upper(stats.O)
    N = _upper(stats.npairs)
    p = _upper(P)
    return float(np.sum(xlogy(O, p)) + np.sum(xlogy(N - O, 1.0 - p)))


def log_beta_coefficient(stats: BlockStats) -> float:
    """log beta(Z, A): sum over blocks of log Gamma(n+2)/(Gamma(O+1)Gamma(n-O+1))."""
    O = _upper(stats.O)
    N = _upper(stats.npairs)
    return float(np.sum(gammaln(N + 2) - gammaln(O + 1) - gammaln(N - O + 1)))


def log_prior_p(P, hp: Hyperparams) -> float:
    """Log density of the diagonally dominant prior on P.

    Diagonals are uniform on (delta, 1]; each off-diagonal entry is uniform
    on [0, min(P_aa, P_bb) - delta].
    """
    P = np.asarray(P, dtype=float)
    k = P.shape[0]
    delta = hp.delta_n
    d = np.diag(P)
    if np.any(d <= delta) or np.any(d > 1.0):
        return -math.inf
    out = -k * math.log1p(-delta)
    if k == 1:
        return out
    iu = triu_idx(k, 1)
    bound = np.minimum(d[iu[0]], d[iu[1]]) - delta
    off = P[iu]
    if off.min() < 0.0 or np.any(off > bound):
        return -math.inf
    return float(out - np.sum(np.log(bound)))


def log_prior_z_sizes(sizes, k: int) -> float:
    sizes = np.asarray(sizes)
    n = int(sizes.sum())
    return float(gammaln(k) - gammaln(n + k) + np.sum(gammaln(sizes + 1)))


def log_prior_z(Z: Assignment) -> float:
    """Dirichlet-multinomial prior Gamma(K)/Gamma(n+K) prod_c Gamma(n_c+1)."""
    return log_prior_z_sizes(Z.block_sizes, Z.k)


def log_prior_k(k: int, hp: Hyperparams, normalized: bool = False) -> float:
    """Truncated Poisson(lambda) log mass of K, up to a constant unless ``normalized``."""
    if k < 1 or k > hp.k_max:
        return -math.inf
    val = k * math.log(hp.lam) - math.lgamma(k + 1)
    if normalized:
        ks = np.arange(1, hp.k_max + 1)
        val -= float(logsumexp(ks * math.log(hp.lam) - gammaln(ks + 1)))
    return val


def log_posterior(A, Z: Assignment, P, hp: Hyperparams) -> float:
    P = np.asarray(P, dtype=float)
    if P.shape != (Z.k, Z.k):
        raise ValueError("connectivity matrix dimension must equal the declared K")
    lpk = log_prior_k(Z.k, hp)
    lpp = log_prior_p(P, hp)
    if lpk == -math.inf or lpp == -math.inf:
        return -math.inf
    return log_likelihood(block_stats(A, Z), P) + lpp + log_prior_z(Z) + lpk
