import itertools

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from mvcrec.item_graph import ItemGraph, PropagationConfig, build_graph, propagate


def brute_edges(seqs, z):
    out = set()
    for seq in seqs:
        for p, q in itertools.permutations(range(len(seq)), 2):
            if 0 < abs(p - q) < z and seq[p] != seq[q]:
                out.add(tuple(sorted((seq[p], seq[q]))))
    return sorted(out)


def dense_oracle(num_items, edges, base, layers, normalize=False):
    """Dense-matrix recursion m^{l+1} = (I + A) m^l, summed over layers."""
    A = np.zeros((num_items, num_items))
    for i, j in edges:
        A[i - 1, j - 1] = A[j - 1, i - 1] = 1.0
    if normalize:
        deg = A.sum(1)
        with np.errstate(divide="ignore"):
            inv = np.where(deg > 0, 1 / np.sqrt(deg), 0.0)
        A = inv[:, None] * A * inv[None, :]
    m = base[1 : num_items + 1]
    total = m.copy()
    for _ in range(layers):
        m = m + A @ m
        total = total + m
    out = base.copy()
    out[1 : num_items + 1] = total
    return out


def table(rows):
    return torch.tensor(rows, dtype=torch.float64)


def test_window_example():
    g = build_graph([[5, 9, 5, 2]], num_items=10, z=3)
    assert g.edges.tolist() == [[2, 5], [2, 9], [5, 9]]


def test_window_of_one_has_no_edges():
    assert build_graph([[1, 2, 3]], num_items=3, z=1).num_edges == 0


def test_dedup_across_sequences():
    g = build_graph([[1, 2], [2, 1]], num_items=2, z=2)
    assert g.edges.tolist() == [[1, 2]]


def test_empty_sequence_list():
    assert build_graph([], num_items=4).num_edges == 0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.lists(st.integers(1, 12), max_size=10), max_size=6), st.integers(1, 5))
def test_build_graph_matches_pair_enumeration(seqs, z):
    g = build_graph(seqs, num_items=12, z=z)
    assert [tuple(e) for e in g.edges.tolist()] == brute_edges(seqs, z)
    # no self loops, symmetric neighbor lists
    nbrs = g.neighbors()
    for i, ns in enumerate(nbrs):
        assert i not in ns
        for j in ns:
            assert i in nbrs[j]


def test_isolated_node_scales_by_layer_count():
    g = ItemGraph(3, np.array([[1, 2]]))
    base = torch.randn(5, 4, dtype=torch.float64)
    for L in range(4):
        out = propagate(g, base, PropagationConfig(L))
        torch.testing.assert_close(out[3], (L + 1) * base[3])


def test_path_graph_hand_values():
    g = ItemGraph(3, np.array([[1, 2], [2, 3]]))
    base = table([[0, 0], [1, 0], [0, 1], [1, 1], [0, 0]])
    out = propagate(g, base, PropagationConfig(1))
    # m^1 = [m1+m2, m1+m2+m3, m2+m3] = [[1,1],[2,2],[1,2]]; output m^0 + m^1
    assert out[1:4].tolist() == [[2.0, 1.0], [2.0, 3.0], [2.0, 3.0]]


def random_graph(rng, n):
    pairs = [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1) if rng.random() < rng.uniform(0.05, 0.5)]
    return ItemGraph(n, np.array(pairs, dtype=np.int64).reshape(-1, 2))


@pytest.mark.parametrize("normalize", [False, True])
def test_sparse_matches_dense_oracle(normalize):
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(1, 21))
        g = random_graph(rng, n)
        L = int(rng.integers(0, 4))
        base = rng.normal(size=(n + 2, 3))
        got = propagate(g, torch.from_numpy(base), PropagationConfig(L, normalize)).numpy()
        np.testing.assert_allclose(got, dense_oracle(n, g.edges.tolist(), base, L, normalize), rtol=0, atol=1e-10)


def test_special_rows_pass_through():
    g = ItemGraph(4, np.array([[1, 2], [2, 3], [3, 4]]))
    base = torch.randn(6, 3, dtype=torch.float64)
    out = propagate(g, base, PropagationConfig(3))
    torch.testing.assert_close(out[0], base[0])
    torch.testing.assert_close(out[5], base[5])


def test_zero_layers_is_identity():
    rng = np.random.default_rng(1)
    g = random_graph(rng, 10)
    base = torch.randn(12, 5, dtype=torch.float64)
    torch.testing.assert_close(propagate(g, base, PropagationConfig(0)), base)


def test_linearity():
    rng = np.random.default_rng(2)
    g = random_graph(rng, 15)
    x = torch.randn(17, 4, dtype=torch.float64)
    y = torch.randn(17, 4, dtype=torch.float64)
    a, b = 0.7, -2.3
    cfg = PropagationConfig(3)
    lhs = propagate(g, a * x + b * y, cfg)
    rhs = a * propagate(g, x, cfg) + b * propagate(g, y, cfg)
    torch.testing.assert_close(lhs, rhs, rtol=0, atol=1e-10)


def test_permutation_equivariance():
    rng = np.random.default_rng(3)
    n = 12
    g = random_graph(rng, n)
    perm = rng.permutation(n) + 1  # new label of old node i is perm[i-1]
    relabeled = ItemGraph(n, np.array(sorted(tuple(sorted((perm[i - 1], perm[j - 1]))) for i, j in g.edges)).reshape(-1, 2))
    base = torch.randn(n + 2, 3, dtype=torch.float64)
    moved = base.clone()
    moved[torch.from_numpy(perm)] = base[1 : n + 1]
    cfg = PropagationConfig(2)
    out = propagate(g, base, cfg)
    out_moved = propagate(relabeled, moved, cfg)
    torch.testing.assert_close(out_moved[torch.from_numpy(perm)], out[1 : n + 1])


def test_gradient_flows_to_base():
    g = ItemGraph(3, np.array([[1, 2], [2, 3]]))
    base = torch.randn(5, 2, dtype=torch.float64, requires_grad=True)
    ok = torch.autograd.gradcheck(lambda b: propagate(g, b, PropagationConfig(2)), (base,))
    assert ok


def test_dimension_mismatch():
    g = ItemGraph(3, np.array([[1, 2]]))
    with pytest.raises(ValueError):
        propagate(g, torch.zeros(3, 2), PropagationConfig(1))


def test_invalid_layer_count():
    with pytest.raises(ValueError):
        PropagationConfig(-1)


def test_edge_file_roundtrip(tmp_path):
    g = build_graph([[3, 1, 2, 5], [4, 4, 1]], num_items=5, z=3)
    g.save(tmp_path / "graph.edges")
    lines = (tmp_path / "graph.edges").read_text().splitlines()
    assert all(int(a) < int(b) for a, b in (ln.split() for ln in lines))
    assert ItemGraph.load(tmp_path / "graph.edges", 5).edges.tolist() == g.edges.tolist()
