import numpy as np
import pytest

import fairspread as fs
from fairspread.model import labels_from_sizes
from fairspread.spread import NEVER, trace_to_csv


def path_model(n, edge_prob=1.0):
    """Path graph as a block model: one community per node, edges only
    between consecutive communities."""
    P = np.zeros((n, n))
    for i in range(n - 1):
        P[i, i + 1] = P[i + 1, i] = edge_prob
    params = fs.DCSBMParams.sbm(n, np.full(n, 1 / n), P)
    return params, labels_from_sizes(np.ones(n, dtype=int))


def star_model(n, edge_prob=1.0):
    """Star with node 0 at the center."""
    P = np.zeros((n, n))
    P[0, 1:] = P[1:, 0] = edge_prob
    params = fs.DCSBMParams.sbm(n, np.full(n, 1 / n), P)
    return params, labels_from_sizes(np.ones(n, dtype=int))


def network_from_params(params, labels):
    # deterministic topologies: every allowed edge has probability 1
    return fs.generate_network(params, labels, np.random.default_rng(0))


class TestSimulateIC:
    def test_beta_zero_only_seeds(self):
        params, labels = path_model(5)
        net = network_from_params(params, labels)
        s = np.array([0, 0, 1, 0, 0])
        trace = fs.simulate_ic(net, fs.TransmissionSpec.scalar(0.0), s, 3,
                               np.random.default_rng(0))
        np.testing.assert_array_equal(trace.activated_at,
                                      [NEVER, NEVER, 0, NEVER, NEVER])

    def test_certain_transmission_two_nodes(self):
        params, labels = path_model(2)
        net = network_from_params(params, labels)
        trace = fs.simulate_ic(net, fs.TransmissionSpec.scalar(1.0),
                               np.array([1, 0]), 1, np.random.default_rng(0))
        np.testing.assert_array_equal(trace.activated_at, [0, 1])

    def test_path_two_step_probability(self):
        # P(node 3 active by t=2) = 0.5 * 0.5 = 0.25 on the fixed path
        params, labels = path_model(3)
        net = network_from_params(params, labels)
        tspec = fs.TransmissionSpec.scalar(0.5)
        s = np.array([1, 0, 0])
        runs = 100_000
        rng = np.random.default_rng(42)
        hits = 0
        for _ in range(runs):
            trace = fs.simulate_ic(net, tspec, s, 2, rng)
            hits += trace.activated_at[2] != NEVER
        freq = hits / runs
        se = np.sqrt(0.25 * 0.75 / runs)
        assert abs(freq - 0.25) < 3 * se

    def test_frontier_transmits_once(self):
        # with t=2 on a 2-path, the seed cannot retry a failed transmission
        params, labels = path_model(2)
        net = network_from_params(params, labels)
        tspec = fs.TransmissionSpec.scalar(0.3)
        runs = 50_000
        rng = np.random.default_rng(9)
        hits = 0
        for _ in range(runs):
            trace = fs.simulate_ic(net, tspec, np.array([1, 0]), 2, rng)
            hits += trace.activated_at[1] != NEVER
        se = np.sqrt(0.3 * 0.7 / runs)
        assert abs(hits / runs - 0.3) < 3 * se

    def test_monotone_in_seeds_live_edge_coupling(self):
        # pre-drawn transmission coins: superset seeds activate a superset
        rng = np.random.default_rng(5)
        labels = fs.sample_labels([0.5, 0.5], 30, rng)
        params = fs.DCSBMParams.sbm(30, [0.5, 0.5], np.array([[0.3, 0.1], [0.1, 0.3]]))
        net = fs.generate_network(params, labels, rng)
        neigh = net.adjacency_lists()
        beta = 0.4
        for rep in range(50):
            coin_rng = np.random.default_rng(1000 + rep)
            coins = coin_rng.random((30, 30))  # coins[j, i]: j -> i succeeds

            def spread(seed_set, t=4):
                active = set(seed_set)
                frontier = list(seed_set)
                for _ in range(t):
                    newly = []
                    for u in frontier:
                        for w in neigh[u]:
                            if w not in active and coins[u, w] < beta:
                                newly.append(w)
                                active.add(w)
                    frontier = newly
                return active

            base = spread({0})
            more = spread({0, 7})
            assert base <= more


class TestCoverage:
    def test_all_seeded(self):
        labels = labels_from_sizes([4, 4])
        trace = fs.ActivationTrace(activated_at=np.zeros(8, dtype=int), horizon=2)
        cov = fs.coverage(trace, labels, 2)
        np.testing.assert_allclose(cov.q, [1.0, 1.0])
        assert cov.m == 1.0
        assert cov.H == pytest.approx(1.0)

    def test_seeds_one_community_no_spread(self):
        labels = labels_from_sizes([3, 3, 3])
        at = np.full(9, NEVER)
        at[:2] = 0
        cov = fs.coverage(fs.ActivationTrace(activated_at=at, horizon=1), labels, 1)
        np.testing.assert_allclose(cov.p, [1.0, 0.0, 0.0])
        assert cov.H == 0.0

    def test_horizon_exceeded(self):
        labels = labels_from_sizes([2])
        trace = fs.ActivationTrace(activated_at=np.zeros(2, dtype=int), horizon=1)
        with pytest.raises(ValueError, match="horizon"):
            fs.coverage(trace, labels, 2)


class TestExactActivation:
    def test_one_step_single_pair(self):
        labels = labels_from_sizes([1, 1])
        theta = np.array([1.0, 1.0])
        params = fs.DCSBMParams(n=2, K=2, pi=[0.5, 0.5],
                                P=np.array([[0, 0.4], [0.4, 0]]), theta=theta)
        probs = fs.exact_activation_probs(params, labels,
                                          fs.TransmissionSpec.scalar(0.5),
                                          np.array([1, 0]), 1)
        np.testing.assert_allclose(probs, [1.0, 0.2])

    def test_two_seeds_one_target(self):
        # both seeds hit the target independently: 1 - (1 - beta P)^2
        labels = labels_from_sizes([1, 1, 1])
        P = np.array([[0, 0, 0.3], [0, 0, 0.3], [0.3, 0.3, 0]])
        params = fs.DCSBMParams.sbm(3, np.full(3, 1 / 3), P)
        probs = fs.exact_activation_probs(params, labels,
                                          fs.TransmissionSpec.scalar(0.5),
                                          np.array([1, 1, 0]), 1)
        expected = 1 - (1 - 0.5 * 0.3) ** 2
        np.testing.assert_allclose(probs, [1.0, 1.0, expected])

    def test_beta_zero_returns_seeds(self):
        labels = labels_from_sizes([2, 2])
        params = fs.DCSBMParams.sbm(4, [0.5, 0.5], np.full((2, 2), 0.5))
        s = np.array([0, 1, 1, 0])
        probs = fs.exact_activation_probs(params, labels,
                                          fs.TransmissionSpec.scalar(0.0), s, 3)
        np.testing.assert_allclose(probs, s.astype(float))

    def test_matches_mc_on_star(self):
        params, labels = star_model(5, edge_prob=0.7)
        tspec = fs.TransmissionSpec.scalar(0.5)
        s = np.array([0, 1, 0, 0, 0])  # seed a leaf
        exact = fs.exact_activation_probs(params, labels, tspec, s, 2)
        mc = fs.mc_activation_probs(params, labels, tspec, s, 2, 100_000,
                                    np.random.default_rng(8))
        se = np.sqrt(np.maximum(exact * (1 - exact), 1e-12) / 100_000)
        assert np.all(np.abs(exact - mc) <= 3 * se + 1e-9)


class TestBuildPsi:
    def test_sbm_off_diagonal(self):
        labels = labels_from_sizes([2, 2])
        P = np.array([[0.3, 0.05], [0.05, 0.2]])
        params = fs.DCSBMParams.sbm(4, [0.5, 0.5], P)
        op = fs.build_psi(params, labels, fs.TransmissionSpec.scalar(0.5))
        expected = 0.5 * P[np.ix_(labels.c, labels.c)]
        np.fill_diagonal(expected, 0.0)
        np.testing.assert_allclose(op.dense, expected)

    def test_two_node_arithmetic(self):
        labels = labels_from_sizes([2])
        params = fs.DCSBMParams.sbm(2, [1.0], np.array([[0.1]]))
        op = fs.build_psi(params, labels, fs.TransmissionSpec.scalar(0.2))
        np.testing.assert_allclose(op.dense, [[0, 0.02], [0.02, 0]])

    def test_compressed_matches_dense(self):
        rng = np.random.default_rng(2)
        labels = fs.sample_labels([0.7, 0.2, 0.1], 300, rng)
        raw = rng.poisson(5, 300) + 1.0
        theta = fs.normalize_theta(raw, labels, [0.7, 0.2, 0.1])
        params = fs.DCSBMParams(n=300, K=3, pi=[0.7, 0.2, 0.1],
                                P=fs.sbm_weight_matrix([10, 5, 2.5]), theta=theta)
        op = fs.build_psi(params, labels, fs.TransmissionSpec.scalar(0.2))
        for t in (1, 2, 3):
            for probe in range(3):
                s = np.random.default_rng(10 * t + probe).random(300)
                dense_out = np.linalg.matrix_power(op.dense, t) @ s
                vec = s.copy()
                for _ in range(t):
                    vec = op.apply_compressed(vec)
                assert np.abs(dense_out - vec).max() < 1e-10

    def test_entry_outside_unit_interval_raises(self):
        labels = labels_from_sizes([1, 1])
        theta = np.array([2.0, 2.0])  # single-member communities keep theta as-is
        with pytest.raises(ValueError):
            params = fs.DCSBMParams(n=2, K=2, pi=[0.5, 0.5],
                                    P=np.full((2, 2), 0.5), theta=theta)
            fs.build_psi(params, labels, fs.TransmissionSpec.scalar(1.0))

    def test_blockwise_beta(self):
        labels = labels_from_sizes([2, 2])
        P = np.full((2, 2), 0.4)
        params = fs.DCSBMParams.sbm(4, [0.5, 0.5], P)
        tspec = fs.TransmissionSpec.blockwise(within=0.5, between=0.1, K=2)
        op = fs.build_psi(params, labels, tspec)
        assert op.dense[0, 1] == pytest.approx(0.2)   # within community
        assert op.dense[0, 2] == pytest.approx(0.04)  # between communities


class TestApproximations:
    def setup_method(self):
        self.labels = labels_from_sizes([700, 200, 100])
        self.params = fs.DCSBMParams.sbm(1000, [0.7, 0.2, 0.1],
                                         fs.sbm_weight_matrix([10, 5, 2.5]))
        self.op = fs.build_psi(self.params, self.labels,
                               fs.TransmissionSpec.scalar(0.2))

    def test_t_zero_total(self):
        s = np.zeros(1000)
        s[:30] = 1
        assert fs.approx_total(self.op, s, 0) == pytest.approx(30 / 1000)

    def test_one_step_expansion(self):
        rng = np.random.default_rng(0)
        s = (rng.random(1000) < 0.03).astype(float)
        expected = self.op.dense.sum(axis=0) @ s / 1000
        assert fs.approx_total(self.op, s, 1) == pytest.approx(expected, rel=1e-12)

    def test_one_step_remainder_bound(self):
        # versus the exact one-step expectation 1 - prod(1 - psi_ij s_j)
        rng = np.random.default_rng(3)
        labels = fs.sample_labels([0.6, 0.4], 10, rng)
        params = fs.DCSBMParams.sbm(10, [0.6, 0.4], np.full((2, 2), 0.3))
        op = fs.build_psi(params, labels, fs.TransmissionSpec.scalar(0.5))
        s = np.array([1, 0, 0, 1, 0, 0, 0, 0, 0, 0], dtype=float)
        linear = op.apply(s)
        exact = 1.0 - np.prod(1.0 - op.dense * s[None, :], axis=1)
        m_linear = linear.sum() / 10
        m_exact = exact.sum() / 10
        bound = 0.5 * (linear ** 2).sum() / 10
        assert abs(m_linear - m_exact) <= bound + 1e-12

    def test_t_zero_by_community(self):
        s = np.zeros(1000)
        s[:30] = 1  # all seeds in community 1
        q = fs.approx_by_community(self.op, self.labels, self.params.pi, s, 0)
        np.testing.assert_allclose(q, [30 / 700, 0, 0])

    def test_total_identity(self):
        rng = np.random.default_rng(1)
        s = rng.random(1000)
        for t in (0, 1, 2):
            q = fs.approx_by_community(self.op, self.labels, self.params.pi, s, t)
            m = fs.approx_total(self.op, s, t)
            total = (self.params.pi * 1000 * q).sum()
            assert abs(total - 1000 * m) < 1e-9

    def test_oracle_dense_matrix(self):
        # independent dense linear-algebra computation of the same quantity
        rng = np.random.default_rng(4)
        s = (rng.random(1000) < 0.03).astype(float)
        t = 2
        Z = self.labels.Z
        expected = (Z.T @ (np.linalg.matrix_power(self.op.dense, t) @ s)
                    / (self.params.pi * 1000))
        got = fs.approx_by_community(self.op, self.labels, self.params.pi, s, t)
        np.testing.assert_allclose(got, expected, atol=1e-10)


class TestOverestimation:
    def test_linear_mass_dominates_exact_cumulative(self):
        # cumulative linear mass sum_{r<=t} (psi^r s) overestimates the
        # exact cumulative activation probability, for every node and t
        rng = np.random.default_rng(6)
        for trial in range(10):
            n = int(rng.integers(5, 30))
            pi = np.array([0.5, 0.5])
            labels = fs.sample_labels(pi, n, rng)
            P = rng.uniform(0.05, 0.5, size=(2, 2))
            P = (P + P.T) / 2
            params = fs.DCSBMParams.sbm(n, pi, P)
            tspec = fs.TransmissionSpec.scalar(float(rng.uniform(0.1, 0.9)))
            s = np.zeros(n)
            s[rng.choice(n, size=max(1, n // 5), replace=False)] = 1
            op = fs.build_psi(params, labels, tspec)
            for t in (1, 2, 3):
                exact = fs.exact_activation_probs(params, labels, tspec, s, t)
                mass = np.zeros(n)
                vec = s.copy()
                mass += vec
                for _ in range(t):
                    vec = op.apply(vec)
                    mass += vec
                assert np.all(mass >= exact - 1e-12)

    def test_one_step_linear_dominates_formula(self):
        rng = np.random.default_rng(12)
        labels = fs.sample_labels([0.5, 0.5], 20, rng)
        params = fs.DCSBMParams.sbm(20, [0.5, 0.5], np.full((2, 2), 0.4))
        op = fs.build_psi(params, labels, fs.TransmissionSpec.scalar(0.6))
        s = np.zeros(20)
        s[:4] = 1
        linear = op.apply(s)
        formula = 1.0 - np.prod(1.0 - op.dense * s[None, :], axis=1)
        assert np.all(linear >= formula - 1e-12)


def test_trace_csv_roundtrip(tmp_path):
    labels = labels_from_sizes([2, 1])
    trace = fs.ActivationTrace(activated_at=np.array([0, NEVER, 2]), horizon=2)
    path = tmp_path / "trace.csv"
    trace_to_csv(trace, labels, path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "node,community,activation_time"
    assert lines[1] == "0,0,0"
    assert lines[2] == "1,0,"
    assert lines[3] == "2,1,2"
