import numpy as np
import pytest

from commnet import corrnet
from commnet.errors import DataError
from commnet.marketdata import WindowSlice

from oracles import is_planar_bruteforce, two_pass_correlation


def random_correlation(n, rng, samples=None):
    """Valid correlation matrix from random data (distinct entries a.s.)."""
    data = rng.standard_normal((n, samples or max(2 * n, 20)))
    return corrnet.CorrelationMatrix(np.corrcoef(data))


class TestPearson:
    def test_perfect_positive(self):
        data = np.array([[1.0, 2, 3], [1.0, 2, 3], [0.0, 5, 1]])
        corr = corrnet.pearson(data).values
        assert corr[0, 1] == pytest.approx(1.0, abs=1e-12)

    def test_perfect_negative(self):
        data = np.array([[1.0, 2, 3], [3.0, 2, 1], [0.0, 5, 1]])
        assert corrnet.pearson(data).values[0, 1] == pytest.approx(-1.0, abs=1e-12)

    def test_matches_direct_summation(self):
        x = [1.0, 2.0, 3.0, 4.0]
        y = [1.0, 2.0, 3.0, 10.0]
        corr = corrnet.pearson(np.array([x, y]))
        assert corr.values[0, 1] == pytest.approx(two_pass_correlation(x, y), abs=1e-12)

    def test_zero_variance_reports_ticker(self):
        window = WindowSlice(0, np.array([[1.0, 1, 1], [1.0, 2, 3]]),
                             tickers=["FLAT", "OK"])
        with pytest.raises(DataError, match="FLAT"):
            corrnet.pearson(window)

    def test_unit_diagonal_and_symmetry(self, rng):
        corr = corrnet.pearson(rng.standard_normal((8, 30))).values
        assert np.allclose(np.diag(corr), 1.0)
        assert np.array_equal(corr, corr.T)
        assert np.abs(corr).max() <= 1.0


class TestDistanceAndUnsigned:
    def test_endpoints(self):
        corr = corrnet.CorrelationMatrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
        assert corrnet.to_distance(corr).values[0, 1] == 0.0
        corr = corrnet.CorrelationMatrix(np.array([[1.0, -1.0], [-1.0, 1.0]]))
        assert corrnet.to_distance(corr).values[0, 1] == pytest.approx(2.0, abs=1e-15)
        corr = corrnet.CorrelationMatrix(np.array([[1.0, 0.0], [0.0, 1.0]]))
        assert corrnet.to_distance(corr).values[0, 1] == pytest.approx(
            1.4142135623730951, abs=1e-15)

    def test_distance_correlation_identity(self, rng):
        corr = random_correlation(7, rng)
        d = corrnet.to_distance(corr).values
        # d^2 + 2C = 2 exactly, for every pair
        assert np.allclose(d ** 2 + 2 * corr.values, 2.0, atol=1e-12)

    def test_unsigned_endpoints_and_roundtrip(self, rng):
        corr = random_correlation(6, rng)
        unsigned = corrnet.to_unsigned(corr)
        assert unsigned.values.min() >= 0.0 and unsigned.values.max() <= 1.0
        assert np.allclose(np.diag(unsigned.values), 1.0)
        assert np.allclose(2 * unsigned.values - 1, corr.values, atol=1e-15)
        iu = np.triu_indices(6, 1)
        assert np.array_equal(np.argsort(unsigned.values[iu]), np.argsort(corr.values[iu]))


class TestBuildPmfg:
    def test_k4_for_four_nodes(self, rng):
        net = corrnet.build_pmfg(random_correlation(4, rng))
        assert net.edge_count == 6
        assert np.all(net.binary_adjacency()[np.triu_indices(4, 1)] == 1)

    def test_five_nodes_rejects_weakest_edge(self, rng):
        corr = random_correlation(5, rng)
        net = corrnet.build_pmfg(corr)
        assert net.edge_count == 9
        # the one missing edge is exactly the lowest-similarity pair: any
        # five-node graph short of the full clique is planar, so only the
        # last candidate (which would complete the clique) gets rejected
        present = {(i, j) for i, j, *_ in net.edges}
        iu, ju = np.triu_indices(5, 1)
        sims = corr.values[iu, ju]
        weakest = int(np.argmin(sims))
        assert (int(iu[weakest]), int(ju[weakest])) not in present
        assert len(present) == 9
        full = net.binary_adjacency()
        full[iu[weakest], ju[weakest]] = full[ju[weakest], iu[weakest]] = 1
        assert not is_planar_bruteforce(full)

    @pytest.mark.parametrize("n", [5, 9, 14, 21])
    def test_edge_count_planarity_connectivity(self, n, rng):
        net = corrnet.build_pmfg(random_correlation(n, rng))
        assert net.edge_count == 3 * (n - 2)
        ok, embedding = corrnet.is_planar(net.binary_adjacency())
        assert ok and embedding is not None
        import networkx as nx
        assert nx.is_connected(net.to_graph())

    def test_invariant_under_unsigned_transform(self, rng):
        corr = random_correlation(12, rng)
        edges_signed_scale = {(i, j) for i, j, *_ in corrnet.build_pmfg(corr).edges}
        transformed = corrnet.CorrelationMatrix(corrnet.to_unsigned(corr).values)
        edges_transformed = {(i, j) for i, j, *_ in corrnet.build_pmfg(transformed).edges}
        assert edges_signed_scale == edges_transformed

    def test_deterministic(self, rng):
        corr = random_correlation(10, rng)
        a = corrnet.build_pmfg(corr)
        b = corrnet.build_pmfg(corr)
        assert a.edges == b.edges

    def test_edge_payload(self, rng):
        corr = random_correlation(6, rng)
        net = corrnet.build_pmfg(corr)
        for i, j, signed, unsigned, distance in net.edges:
            assert signed == pytest.approx(corr.values[i, j])
            assert unsigned == pytest.approx((1 + corr.values[i, j]) / 2)
            assert distance == pytest.approx(np.sqrt(2 * (1 - corr.values[i, j])))

    def test_too_small(self):
        with pytest.raises(ValueError):
            corrnet.build_pmfg(corrnet.CorrelationMatrix(np.eye(2)))

    def test_top_ranked_edge_always_present(self, rng):
        corr = random_correlation(9, rng)
        iu, ju = np.triu_indices(9, 1)
        top = int(np.argmax(corr.values[iu, ju]))
        present = {(i, j) for i, j, *_ in corrnet.build_pmfg(corr).edges}
        assert (int(iu[top]), int(ju[top])) in present


class TestIsPlanar:
    def test_kuratowski_graphs(self):
        k4 = np.ones((4, 4)) - np.eye(4)
        assert corrnet.is_planar(k4)[0]
        k5 = np.ones((5, 5)) - np.eye(5)
        assert not corrnet.is_planar(k5)[0]
        k33 = np.zeros((6, 6))
        k33[:3, 3:] = 1
        k33 += k33.T
        assert not corrnet.is_planar(k33)[0]

    def test_matches_bruteforce_minor_search(self, rng):
        for trial in range(40):
            n = int(rng.integers(4, 8))
            p = float(rng.uniform(0.3, 0.9))
            adjacency = (rng.random((n, n)) < p).astype(float)
            adjacency = np.triu(adjacency, 1)
            adjacency += adjacency.T
            assert corrnet.is_planar(adjacency)[0] == is_planar_bruteforce(adjacency)

    def test_small_graphs_always_planar(self, rng):
        # with at most eight edges neither forbidden minor can exist
        for trial in range(20):
            n = int(rng.integers(3, 9))
            adjacency = np.zeros((n, n))
            pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
            count = min(len(pairs), int(rng.integers(0, 9)))
            for k in rng.choice(len(pairs), size=count, replace=False):
                i, j = pairs[int(k)]
                adjacency[i, j] = adjacency[j, i] = 1
            assert corrnet.is_planar(adjacency)[0]
            assert is_planar_bruteforce(adjacency)


class TestNetworkSummary:
    def _triangle(self):
        edges = [(0, 1, 1.0, 1.0, 1.0), (0, 2, 1.0, 1.0, 1.0), (1, 2, 1.0, 1.0, 1.0)]
        return corrnet.PmfgNetwork(n=3, nodes=[0, 1, 2], edges=edges)

    def test_unit_triangle(self):
        summary = corrnet.network_summary(self._triangle())
        assert summary["clustering_coefficient"] == pytest.approx(1.0)
        assert summary["weighted_diameter"] == pytest.approx(1.0)
        assert summary["avg_weighted_degree"] == pytest.approx(2.0)

    def test_disconnected_rejected(self):
        edges = [(0, 1, 1.0, 1.0, 1.0), (2, 3, 1.0, 1.0, 1.0)]
        net = corrnet.PmfgNetwork(n=4, nodes=list(range(4)), edges=edges)
        with pytest.raises(DataError, match="disconnected"):
            corrnet.network_summary(net)


class TestNetworkIo:
    def test_roundtrip(self, tmp_path, small_pmfg):
        path = tmp_path / "net.csv"
        corrnet.write_network(small_pmfg, path, extra={"period": "x"})
        loaded = corrnet.read_network(path)
        assert loaded.n == small_pmfg.n
        assert loaded.edges == small_pmfg.edges

    def test_header_checked(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n")
        (tmp_path / "bad.csv.json").write_text("{}")
        with pytest.raises(DataError, match="header"):
            corrnet.read_network(path)
