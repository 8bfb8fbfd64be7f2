"""Node-wise connectivity matrices and recovery of (K, Z, P) from them."""
from __future__ import annotations

import numpy as np

from .model import Assignment, check_connectivity


class RecoveryError(ValueError):
    """theta admits no consistent block structure at the given tolerance."""


def _check_theta(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 2 or theta.shape[0] != theta.shape[1]:
        raise ValueError("theta must be square")
    return theta


def theta_from(Z: Assignment, P) -> np.ndarray:
    """T(Z P Z^T): pairwise edge probabilities with a zeroed diagonal."""
    P = check_connectivity(P)
    if P.shape[0] != Z.k:
        raise ValueError(f"P is {P.shape[0]}x{P.shape[0]} but the assignment declares K={Z.k}")
    theta = P[np.ix_(Z.labels, Z.labels)]
    np.fill_diagonal(theta, 0.0)
    return theta


def is_diagonally_dominant(P, delta: float) -> bool:
    """True iff P_aa > delta + max_{b != a} P_ab for every a."""
    P = np.asarray(P, dtype=float)
    k = P.shape[0]
    if k == 1:
        return True
    off = P.copy()
    np.fill_diagonal(off, -np.inf)
    return bool(np.all(np.diag(P) > delta + off.max(axis=1)))


def sup_norm(theta1, theta2) -> float:
    """max_{i<j} |theta1_ij - theta2_ij|."""
    t1, t2 = _check_theta(theta1), _check_theta(theta2)
    if t1.shape != t2.shape:
        raise ValueError("theta matrices differ in dimension")
    n = t1.shape[0]
    if n < 2:
        return 0.0
    iu = np.triu_indices(n, 1)
    return float(np.max(np.abs(t1[iu] - t2[iu])))


def recover(theta, tol: float = 0.0) -> tuple[int, Assignment, np.ndarray]:
    """Invert theta = T(Z P Z^T).

    Node i's candidate set is every j != i whose theta_ij lies within
    ``tol`` of the row maximum. Two nodes share a community when each is in
    the other's set. Communities are numbered by their smallest member.
    With ``tol`` > 0 each P entry is the block average of theta.
    """
    if tol < 0:
        raise ValueError("tol must be non-negative")
    theta = _check_theta(theta)
    n = theta.shape[0]
    if n < 2:
        raise RecoveryError("need at least two nodes")
    masked = theta.copy()
    np.fill_diagonal(masked, -np.inf)
    row_max = masked.max(axis=1)
    cand = masked >= (row_max - tol)[:, None]
    mutual = cand & cand.T

    labels = np.full(n, -1, dtype=np.int64)
    k = 0
    for i in range(n):
        if labels[i] >= 0:
            continue
        group = mutual[i].copy()
        group[i] = True
        members = np.flatnonzero(group)
        if members.size < 2:
            raise RecoveryError(f"node {i + 1} forms a singleton community")
        if np.any(labels[members] >= 0):
            raise RecoveryError(f"node {i + 1} links into an existing community")
        for j in members:
            other = mutual[j].copy()
            other[j] = True
            if not np.array_equal(other, group):
                raise RecoveryError(f"candidate sets of nodes {i + 1} and {j + 1} overlap partially")
            own = cand[j].copy()
            own[j] = True
            if not np.array_equal(own, group):
                raise RecoveryError(f"candidate set of node {j + 1} crosses communities")
        labels[members] = k
        k += 1

    Z = Assignment(labels, k)
    P = np.empty((k, k))
    blocks = [np.flatnonzero(labels == a) for a in range(k)]
    for a in range(k):
        for b in range(a, k):
            ia, ib = blocks[a], blocks[b]
            if tol == 0.0:
                # exact theta: every pair in the block carries the same value
                val = theta[ia[0], ib[1] if a == b else ib[0]]
            else:
                sub = theta[np.ix_(ia, ib)]
                val = sub[np.triu_indices(ia.size, 1)].mean() if a == b else sub.mean()
            P[a, b] = P[b, a] = val
    return k, Z, P
