"""Synthetic SBM networks, benchmark connectivity matrices, edge-list I/O."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._rng import make_rng
from .model import Assignment, check_connectivity


class EdgeListFormatError(ValueError):
    """Malformed edge-list input; ``lineno`` is 1-based."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class AdjacencyMatrix:
    """Symmetric binary adjacency matrix with a zero diagonal."""

    __slots__ = ("dense",)

    def __init__(self, dense):
        dense = np.array(dense)
        if dense.ndim != 2 or dense.shape[0] != dense.shape[1]:
            raise ValueError("adjacency matrix must be square")
        if not np.all((dense == 0) | (dense == 1)):
            raise ValueError("adjacency entries must be 0 or 1")
        if np.any(np.diag(dense) != 0):
            raise ValueError("self-loops are not allowed")
        if not np.array_equal(dense, dense.T):
            raise ValueError("adjacency matrix must be symmetric")
        dense = dense.astype(np.float64)
        dense.setflags(write=False)
        self.dense = dense

    @classmethod
    def from_edges(cls, n: int, edges) -> "AdjacencyMatrix":
        """Build from 0-based ``(i, j)`` pairs."""
        dense = np.zeros((n, n), dtype=np.int8)
        for i, j in edges:
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            dense[i, j] = dense[j, i] = 1
        return cls(dense)

    @property
    def n(self) -> int:
        return self.dense.shape[0]

    @property
    def n_edges(self) -> int:
        return int(self.dense.sum()) // 2

    def edges(self) -> list[tuple[int, int]]:
        """0-based edges with i < j in lexicographic order."""
        rows, cols = np.nonzero(np.triu(self.dense, 1))
        return list(zip(rows.tolist(), cols.tolist()))

    def __eq__(self, other) -> bool:
        if not isinstance(other, AdjacencyMatrix):
            return NotImplemented
        return np.array_equal(self.dense, other.dense)

    __hash__ = None

    def __repr__(self) -> str:
        return f"AdjacencyMatrix(n={self.n}, edges={self.n_edges})"


@dataclass(frozen=True)
class GroundTruth:
    z0: Assignment
    p0: np.ndarray
    rho: float = 1.0

    def __post_init__(self):
        p0 = check_connectivity(self.p0)
        if p0.shape[0] != self.z0.k:
            raise ValueError("p0 dimension must equal the number of communities in z0")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        if np.any(self.z0.block_sizes < 2):
            raise ValueError("every community of z0 needs at least two nodes")
        object.__setattr__(self, "p0", p0)

    @property
    def k0(self) -> int:
        return self.z0.k


def generate_sbm(truth: GroundTruth, n: int, seed) -> AdjacencyMatrix:
    """Draw A_ij ~ Bernoulli(rho * P0[z_i, z_j]) independently for i < j.

    Uniforms are consumed in row-major order over the strict upper triangle.
    """
    if truth.z0.n != n:
        raise ValueError(f"z0 has {truth.z0.n} labels but n = {n}")
    probs_block = truth.rho * truth.p0
    if np.any(probs_block < 0.0) or np.any(probs_block > 1.0):
        raise ValueError("edge probabilities must lie in [0, 1]")
    rng = make_rng(seed)
    rows, cols = np.triu_indices(n, 1)
    z = truth.z0.labels
    probs = probs_block[z[rows], z[cols]]
    hits = rng.random(rows.size) < probs
    dense = np.zeros((n, n), dtype=np.int8)
    dense[rows[hits], cols[hits]] = 1
    dense[cols[hits], rows[hits]] = 1
    return AdjacencyMatrix(dense)


def make_case(case_id: int, k0: int) -> np.ndarray:
    """Benchmark connectivity matrices P0 for cases 1-4."""
    if k0 < 1:
        raise ValueError("k0 must be at least 1")
    eye = np.eye(k0)
    ones = np.ones((k0, k0))
    if case_id == 1:
        return 0.6 * eye + 0.2 * ones
    if case_id == 2:
        return 0.2 * eye + 0.6 * ones
    if case_id == 3:
        return 0.4 * eye + 0.4 * ones
    if case_id == 4:
        head = np.zeros(k0)
        head[: math.ceil(k0 / 2)] = 1.0
        return 0.2 * eye + 0.2 * ones + 0.4 * np.outer(head, head)
    raise ValueError(f"case_id must be 1, 2, 3 or 4, got {case_id}")


def balanced_assignment(n: int, k0: int) -> Assignment:
    """Round-robin labels: node i goes to community i mod k0."""
    if k0 < 1:
        raise ValueError("k0 must be at least 1")
    if n < 2 * k0:
        raise ValueError(f"n = {n} is too small for {k0} communities of size >= 2")
    return Assignment(np.arange(n) % k0, k0)


def format_edgelist(A: AdjacencyMatrix) -> str:
    lines = [f"n {A.n}"]
    lines.extend(f"{i + 1} {j + 1}" for i, j in A.edges())
    return "\n".join(lines) + "\n"


def parse_edgelist(text: str) -> AdjacencyMatrix:
    lines = text.splitlines()
    if not lines:
        raise EdgeListFormatError("empty file", 1)
    head = lines[0].split()
    if len(head) != 2 or head[0] != "n":
        raise EdgeListFormatError("expected header 'n <count>'", 1)
    try:
        n = int(head[1])
    except ValueError:
        raise EdgeListFormatError(f"node count {head[1]!r} is not an integer", 1) from None
    if n < 1:
        raise EdgeListFormatError("node count must be positive", 1)
    dense = np.zeros((n, n), dtype=np.int8)
    for lineno, line in enumerate(lines[1:], start=2):
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) != 2:
            raise EdgeListFormatError("expected two node indices", lineno)
        try:
            i, j = int(tokens[0]), int(tokens[1])
        except ValueError:
            raise EdgeListFormatError("node indices must be integers", lineno) from None
        if not (1 <= i <= n and 1 <= j <= n):
            raise EdgeListFormatError(f"node index outside 1..{n}", lineno)
        if i == j:
            raise EdgeListFormatError("self-loop", lineno)
        dense[i - 1, j - 1] = dense[j - 1, i - 1] = 1
    return AdjacencyMatrix(dense)


def write_edgelist(A: AdjacencyMatrix, path) -> None:
    Path(path).write_text(format_edgelist(A), newline="\n")


def read_edgelist(path) -> AdjacencyMatrix:
    return parse_edgelist(Path(path).read_text())
