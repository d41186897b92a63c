import math

import numpy as np
import pytest

from nettomo.graphgen import (
    GraphKind,
    GraphModel,
    connectivity_probability,
    degree,
    generate,
    graph_from_adjacency,
    is_connected,
    max_degree,
    permute,
    write_edge_list,
)


def er_model(n, p, seed=0):
    return GraphModel(GraphKind.ERDOS_RENYI_SYMMETRIC, n, p, seed=seed)


def test_er_graph_symmetric_with_unit_diagonal():
    g = generate(er_model(100, 2 * math.log(100) / 100, seed=11))
    adj = np.asarray(g.adjacency)
    assert np.array_equal(adj, adj.T)
    assert np.all(np.diag(adj) == 1)
    assert np.all((adj == 0) | (adj == 1))
    assert g.symmetric


def test_single_agent_graph_is_forced_diagonal():
    for kind in GraphKind:
        g = generate(GraphModel(kind, 1, 0.5, seed=0))
        assert np.array_equal(np.asarray(g.adjacency), [[1]])


def test_p_one_gives_complete_graph():
    g = generate(er_model(6, 1.0, seed=4))
    assert np.all(np.asarray(g.adjacency) == 1)


def test_generation_deterministic_given_seed():
    a = generate(er_model(50, 0.1, seed=123))
    b = generate(er_model(50, 0.1, seed=123))
    assert np.array_equal(a.adjacency, b.adjacency)
    c = generate(er_model(50, 0.1, seed=124))
    assert not np.array_equal(a.adjacency, c.adjacency)


def test_directed_binomial_generally_asymmetric():
    g = generate(GraphModel(GraphKind.BINOMIAL_DIRECTED, 60, 0.3, seed=2))
    adj = np.asarray(g.adjacency)
    assert np.all(np.diag(adj) == 1)
    assert not np.array_equal(adj, adj.T)
    assert not g.symmetric


def test_edge_frequency_within_three_binomial_deviations():
    n, p = 200, 0.1
    g = generate(er_model(n, p, seed=7))
    iu = np.triu_indices(n, k=1)
    slots = iu[0].size
    assert slots >= 10_000
    freq = np.asarray(g.adjacency)[iu].mean()
    assert abs(freq - p) <= 3 * math.sqrt(p * (1 - p) / slots)


def test_connectivity_probability_values():
    assert connectivity_probability(100, math.log(100)) == pytest.approx(2 * math.log(100) / 100)
    assert connectivity_probability(math.e, 0.0) == pytest.approx(1 / math.e)
    assert connectivity_probability(3, 100.0) == 1.0  # clamped
    with pytest.raises(ValueError):
        connectivity_probability(100, -math.log(100))
    with pytest.raises(ValueError):
        connectivity_probability(1, 0.0)


def test_degree_on_complete_and_single_graphs():
    g = generate(er_model(6, 1.0, seed=0))
    assert all(degree(g, i) == 6 for i in range(6))
    assert max_degree(g) == 6
    single = generate(er_model(1, 0.5, seed=0))
    assert degree(single, 0) == 1


def test_degree_matches_bruteforce_row_count():
    g = generate(er_model(20, 0.3, seed=9))
    adj = np.asarray(g.adjacency)
    brute = [sum(1 for j in range(20) if adj[i, j] != 0) for i in range(20)]
    assert [degree(g, i) for i in range(20)] == brute
    assert max_degree(g) == max(brute)
    # off-diagonal count equals the row sum minus the self entry
    for i in range(20):
        assert degree(g, i) - 1 == adj[i].sum() - adj[i, i]


def test_degree_index_out_of_range():
    g = generate(er_model(5, 0.5, seed=0))
    with pytest.raises(IndexError):
        degree(g, 5)
    with pytest.raises(IndexError):
        degree(g, -1)


class UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        self.parent[self.find(a)] = self.find(b)


def union_find_connected(adj):
    n = adj.shape[0]
    uf = UnionFind(n)
    for i in range(n):
        for j in range(i + 1, n):
            if adj[i, j] or adj[j, i]:
                uf.union(i, j)
    return len({uf.find(i) for i in range(n)}) == 1


def test_is_connected_trivial_cases():
    assert is_connected(generate(er_model(6, 1.0, seed=0)))
    two = graph_from_adjacency(np.eye(2, dtype=int))
    assert not is_connected(two)


@pytest.mark.parametrize("seed", range(8))
def test_is_connected_matches_union_find(seed):
    g = generate(er_model(100, 2 * math.log(100) / 100, seed=seed))
    assert is_connected(g) == union_find_connected(np.asarray(g.adjacency))


def test_connected_in_at_least_95_of_100_trials_at_scaling_law():
    n = 100
    p = connectivity_probability(n, math.log(n))
    hits = sum(is_connected(generate(er_model(n, p, seed=s))) for s in range(100))
    assert hits >= 95


def test_retry_until_connected():
    # p far below the connectivity threshold: unconditional draws are
    # almost surely disconnected, so the bounded retry must give up
    sparse = GraphModel(GraphKind.ERDOS_RENYI_SYMMETRIC, 80, 0.005, seed=1)
    with pytest.raises(RuntimeError):
        generate(sparse, require_connected=True, max_attempts=20)
    ok = generate(er_model(30, 0.4, seed=5), require_connected=True)
    assert is_connected(ok)


def test_permute_identity_and_roundtrip():
    g = generate(er_model(12, 0.4, seed=3))
    ident = list(range(12))
    assert np.array_equal(permute(g, ident).adjacency, g.adjacency)
    rng = np.random.default_rng(0)
    perm = rng.permutation(12)
    inverse = np.argsort(perm)
    back = permute(permute(g, perm), inverse)
    assert np.array_equal(back.adjacency, g.adjacency)


def test_permute_reference_matrix_roundtrip():
    # P = [[0,0,0,1],[0,1,0,0],[1,0,0,0],[0,0,1,0]] sends rows 1,2,3,4
    # to rows 3,2,4,1, i.e. perm = [2, 1, 3, 0]
    g = generate(er_model(4, 0.6, seed=8))
    perm = [2, 1, 3, 0]
    moved = permute(g, perm)
    p_mat = np.zeros((4, 4), dtype=int)
    for i, target in enumerate(perm):
        p_mat[target, i] = 1
    expected = p_mat @ np.asarray(g.adjacency) @ p_mat.T
    assert np.array_equal(np.asarray(moved.adjacency), expected)
    back = permute(moved, np.argsort(perm))
    assert np.array_equal(back.adjacency, g.adjacency)


def test_permute_entrywise_property():
    g = generate(er_model(15, 0.3, seed=17))
    perm = np.random.default_rng(1).permutation(15)
    moved = np.asarray(permute(g, perm).adjacency)
    adj = np.asarray(g.adjacency)
    for i in range(15):
        for j in range(15):
            assert moved[perm[i], perm[j]] == adj[i, j]
    assert np.all(np.diag(moved) == 1)


def test_permute_rejects_non_bijection():
    g = generate(er_model(5, 0.5, seed=0))
    with pytest.raises(ValueError):
        permute(g, [0, 1, 2, 3, 3])
    with pytest.raises(ValueError):
        permute(g, [0, 1, 2])


def test_graph_from_adjacency_validation():
    with pytest.raises(ValueError):
        graph_from_adjacency(np.zeros((3, 3), dtype=int))  # zero diagonal
    with pytest.raises(ValueError):
        graph_from_adjacency(np.full((2, 2), 2))


def test_edge_list_export(tmp_path):
    g = generate(er_model(10, 0.4, seed=6))
    path = tmp_path / "edges.csv"
    write_edge_list(g, path, header_comment="check")
    lines = path.read_text().splitlines()
    assert lines[0] == "# check"
    assert lines[1] == "i,j"
    adj = np.asarray(g.adjacency)
    expected = int(np.count_nonzero(np.triu(adj, k=1)))
    assert len(lines) - 2 == expected
    for line in lines[2:]:
        i, j = map(int, line.split(","))
        assert adj[i - 1, j - 1] == 1 and i < j
