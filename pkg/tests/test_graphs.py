import numpy as np
import pytest

from dagp.graphs import (
    DirectedGraph,
    in_neighbors,
    is_strongly_connected,
    laplacians,
    load_edge_list,
    out_neighbors,
    random_strongly_connected,
    save_edge_list,
    strongly_connected_components,
)

from conftest import brute_force_strongly_connected

THREE_CYCLE = DirectedGraph(3, frozenset({(1, 0), (2, 1), (0, 2)}))


class TestDirectedGraph:
    def test_rejects_self_loop(self):
        with pytest.raises(ValueError, match="self-loop"):
            DirectedGraph(3, frozenset({(1, 1)}))

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError, match="out of range"):
            DirectedGraph(2, frozenset({(0, 2)}))

    def test_rejects_empty_node_set(self):
        with pytest.raises(ValueError):
            DirectedGraph(0, frozenset())

    def test_edges_deduplicated(self):
        g = DirectedGraph(3, frozenset([(0, 1), (0, 1), (1, 2)]))
        assert g.edge_count == 2


class TestRandomStronglyConnected:
    def test_single_node_trivial(self):
        g = random_strongly_connected(1, 0.5, seed=0)
        assert g.edge_count == 0
        assert is_strongly_connected(g)

    def test_zero_extra_prob_gives_exact_cycle(self):
        g = random_strongly_connected(3, 0.0, seed=1)
        assert g.edge_count == 3
        assert is_strongly_connected(g)
        for v in range(3):
            assert len(in_neighbors(g, v)) == 1
            assert len(out_neighbors(g, v)) == 1

    def test_deterministic_per_seed(self):
        a = random_strongly_connected(12, 0.3, seed=9)
        b = random_strongly_connected(12, 0.3, seed=9)
        assert a.edges == b.edges

    def test_different_seeds_differ(self):
        a = random_strongly_connected(12, 0.3, seed=1)
        b = random_strongly_connected(12, 0.3, seed=2)
        assert a.edges != b.edges

    @pytest.mark.parametrize("seed", range(20))
    def test_always_strongly_connected(self, seed):
        g = random_strongly_connected(10, 0.3, seed=seed)
        assert is_strongly_connected(g)

    def test_rejects_bad_probability(self):
        with pytest.raises(ValueError):
            random_strongly_connected(5, 1.5, seed=0)


class TestStrongConnectivity:
    def test_one_way_pair_is_not(self):
        g = DirectedGraph(2, frozenset({(1, 0)}))
        assert not is_strongly_connected(g)

    def test_cycle_is(self):
        assert is_strongly_connected(THREE_CYCLE)

    def test_components_partition_nodes(self):
        g = DirectedGraph(4, frozenset({(1, 0), (0, 1), (3, 2)}))
        comps = strongly_connected_components(g)
        assert sorted(v for comp in comps for v in comp) == [0, 1, 2, 3]
        assert sorted(map(len, comps)) == [1, 1, 2]

    @pytest.mark.parametrize("seed", range(100))
    def test_agrees_with_bfs_oracle(self, seed):
        # random graphs without the connectivity-forcing cycle
        rng = np.random.default_rng(seed)
        m = 8
        edges = {
            (i, j)
            for i in range(m)
            for j in range(m)
            if i != j and rng.random() < 0.2
        }
        g = DirectedGraph(m, frozenset(edges))
        assert is_strongly_connected(g) == brute_force_strongly_connected(g)


class TestNeighborhoods:
    def test_cycle_read_off(self):
        assert in_neighbors(THREE_CYCLE, 0) == {2}
        assert out_neighbors(THREE_CYCLE, 0) == {1}

    def test_single_node_empty(self):
        g = DirectedGraph(1, frozenset())
        assert in_neighbors(g, 0) == set()
        assert out_neighbors(g, 0) == set()

    def test_degree_counting_identity(self):
        g = random_strongly_connected(6, 0.4, seed=5)
        total_in = sum(len(in_neighbors(g, v)) for v in range(6))
        total_out = sum(len(out_neighbors(g, v)) for v in range(6))
        assert total_in == g.edge_count
        assert total_out == g.edge_count

    def test_transpose_consistency(self):
        g = random_strongly_connected(7, 0.35, seed=11)
        for v in range(7):
            for u in in_neighbors(g, v):
                assert v in out_neighbors(g, u)

    def test_node_out_of_range(self):
        with pytest.raises(ValueError):
            in_neighbors(THREE_CYCLE, 3)


class TestLaplacians:
    def test_cycle_is_identity_minus_shift(self):
        l_in, l_out = laplacians(THREE_CYCLE)
        shift = THREE_CYCLE.adjacency()
        assert np.array_equal(l_in, np.eye(3) - shift)
        assert np.array_equal(l_out, np.eye(3) - shift)

    def test_row_and_column_sums_exact(self):
        g = random_strongly_connected(9, 0.3, seed=2)
        l_in, l_out = laplacians(g)
        assert np.array_equal(l_in @ np.ones(9), np.zeros(9))
        assert np.array_equal(np.ones(9) @ l_out, np.zeros(9))

    def test_diagonal_matches_neighborhood_counts(self):
        g = random_strongly_connected(5, 0.5, seed=3)
        l_in, l_out = laplacians(g)
        for v in range(5):
            assert l_in[v, v] == len(in_neighbors(g, v))
            assert l_out[v, v] == len(out_neighbors(g, v))


class TestEdgeListFile:
    def test_round_trip(self, tmp_path):
        g = random_strongly_connected(8, 0.3, seed=4)
        path = tmp_path / "graph.txt"
        save_edge_list(g, path)
        loaded = load_edge_list(path)
        assert loaded.node_count == g.node_count
        assert loaded.edges == g.edges

    def test_format_shape(self, tmp_path):
        path = tmp_path / "g.txt"
        save_edge_list(THREE_CYCLE, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "3"
        assert len(lines) == 4

    def test_malformed_rejected(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("3\n0 1 7\n")
        with pytest.raises(ValueError, match="malformed"):
            load_edge_list(path)
