import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddsbm import AdjacencyMatrix, GroundTruth, balanced_assignment, generate_sbm, make_case
from ddsbm.netgen import EdgeListFormatError, format_edgelist, parse_edgelist, read_edgelist, write_edgelist


def truth(case=1, k0=3, n=30, rho=1.0):
    return GroundTruth(balanced_assignment(n, k0), make_case(case, k0), rho)


def test_rho_zero_gives_empty_graph():
    A = generate_sbm(truth(rho=0.0), 30, seed=4)
    assert A.n_edges == 0


def test_all_ones_gives_complete_graph():
    t = GroundTruth(balanced_assignment(12, 2), np.ones((2, 2)))
    A = generate_sbm(t, 12, seed=4)
    assert A.n_edges == 12 * 11 // 2


def test_within_block_frequency_case1():
    # pooled over 200 seeds; each network has 3 * C(100, 2) within-block pairs
    t = truth(1, 3, 300)
    z = t.z0.labels
    same = np.triu(z[:, None] == z[None, :], 1)
    hits = 0
    for seed in range(200):
        hits += int(generate_sbm(t, 300, seed).dense[same].sum())
    trials = 200 * int(same.sum())
    se = math.sqrt(0.8 * 0.2 / trials)
    assert abs(hits / trials - 0.8) <= 4 * se


def test_block_rates_match_rho_p0():
    t = truth(4, 4, 40, rho=0.5)
    z = t.z0.labels
    R = 300
    acc = np.zeros((4, 4))
    for seed in range(R):
        d = generate_sbm(t, 40, seed).dense
        onehot = np.eye(4)[z]
        acc += onehot.T @ d @ onehot
    sizes = np.bincount(z)
    npairs = np.outer(sizes, sizes).astype(float)
    np.fill_diagonal(npairs, sizes * (sizes - 1) / 2)
    counts = acc.copy()
    counts[np.diag_indices(4)] /= 2
    p = 0.5 * t.p0
    rate = counts / (R * npairs)
    bound = 4 * np.sqrt(p * (1 - p) / (R * npairs))
    assert np.all(np.abs(rate - p) <= bound)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**64 - 1), case=st.integers(1, 4), rho=st.floats(0.0, 1.0))
def test_generated_matrix_invariants(seed, case, rho):
    A = generate_sbm(truth(case, 3, 15, rho), 15, seed)
    d = A.dense
    assert np.array_equal(d, d.T)
    assert np.all(np.diag(d) == 0)
    assert set(np.unique(d)) <= {0.0, 1.0}


def test_generation_is_deterministic():
    t = truth()
    assert generate_sbm(t, 30, 99) == generate_sbm(t, 30, 99)
    assert generate_sbm(t, 30, 99) != generate_sbm(t, 30, 100)


def test_generate_rejects_bad_inputs():
    with pytest.raises(ValueError):
        generate_sbm(truth(n=30), 31, 0)
    with pytest.raises(ValueError):
        GroundTruth(balanced_assignment(6, 2), make_case(1, 2), rho=1.5)


def test_ground_truth_needs_blocks_of_two():
    from ddsbm import Assignment
    with pytest.raises(ValueError):
        GroundTruth(Assignment([0, 0, 1]), make_case(1, 2))


def test_case_matrices():
    P1 = make_case(1, 3)
    assert np.allclose(np.diag(P1), 0.8) and np.allclose(P1[~np.eye(3, dtype=bool)], 0.2)
    P2 = make_case(2, 3)
    assert np.allclose(np.diag(P2), 0.8) and np.allclose(P2[~np.eye(3, dtype=bool)], 0.6)
    P3 = make_case(3, 5)
    assert np.allclose(np.diag(P3), 0.8) and np.allclose(P3[~np.eye(5, dtype=bool)], 0.4)


def test_case4_literal_formula():
    P = make_case(4, 4)
    head = np.array([1, 1, 0, 0])
    for a in range(4):
        for b in range(4):
            if a != b:
                assert P[a, b] == pytest.approx(0.2 + 0.4 * head[a] * head[b])
    # diagonal: 0.8 for the first ceil(k0/2) communities, 0.4 for the rest
    assert np.allclose(np.diag(P), [0.8, 0.8, 0.4, 0.4])
    assert np.allclose(np.diag(make_case(4, 3)), [0.8, 0.8, 0.4])


def test_make_case_rejects_unknown_case():
    with pytest.raises(ValueError):
        make_case(5, 3)


@pytest.mark.parametrize("n,k0,sizes", [(6, 3, [2, 2, 2]), (7, 3, [3, 2, 2]), (50, 3, [17, 17, 16])])
def test_balanced_assignment(n, k0, sizes):
    Z = balanced_assignment(n, k0)
    assert Z.block_sizes.tolist() == sizes
    assert Z.labels.tolist() == [i % k0 for i in range(n)]


def test_balanced_assignment_rejects_singletons():
    with pytest.raises(ValueError):
        balanced_assignment(5, 3)


def test_edgelist_format_contract():
    A = AdjacencyMatrix.from_edges(4, [(2, 0), (1, 3), (0, 1)])
    assert format_edgelist(A) == "n 4\n1 2\n1 3\n2 4\n"


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**9), n=st.integers(1, 20))
def test_edgelist_round_trip(seed, n):
    rng = np.random.default_rng(seed)
    upper = np.triu(rng.random((n, n)) < 0.3, 1).astype(int)
    A = AdjacencyMatrix(upper + upper.T)
    assert parse_edgelist(format_edgelist(A)) == A


def test_edgelist_file_round_trip(tmp_path):
    A = generate_sbm(truth(), 30, 1)
    write_edgelist(A, tmp_path / "a.txt")
    assert read_edgelist(tmp_path / "a.txt") == A
    assert b"\r" not in (tmp_path / "a.txt").read_bytes()


@pytest.mark.parametrize("text,line", [
    ("", 1),
    ("nodes 4\n", 1),
    ("n four\n", 1),
    ("n 4\n1 2\n1 5\n", 3),
    ("n 4\n1 2 3\n", 2),
    ("n 4\n2 2\n", 2),
    ("n 4\n\n1 x\n", 3),
])
def test_edgelist_errors_carry_line_numbers(text, line):
    with pytest.raises(EdgeListFormatError) as info:
        parse_edgelist(text)
    assert info.value.lineno == line
    assert str(info.value).startswith(f"line {line}:")


def test_adjacency_validation():
    with pytest.raises(ValueError):
        AdjacencyMatrix([[0, 1], [0, 0]])
    with pytest.raises(ValueError):
        AdjacencyMatrix([[1, 0], [0, 0]])
    with pytest.raises(ValueError):
        AdjacencyMatrix([[0, 2], [2, 0]])
