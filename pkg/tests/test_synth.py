"""Planted-partition sampler and the beta noise model."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize, stats

from uncertnet import (
    BlockParams,
    NoiseRequest,
    NoiseSpec,
    apply_noise,
    generate_benchmark,
    sample_network,
    sample_partition,
    solve_noise,
)
from uncertnet.errors import InfeasibleNoise, InvalidShape, InvalidSimplex
from uncertnet.network import Partition
from uncertnet.synth import _rank_pairs, _sample_distinct, _unrank_pairs


def coefficient_matching_c(a1, b1, rho, grid=(0.1, 0.3, 0.5, 0.7, 0.9)):
    """Solve the consistency ratio for ``c`` by least squares on a grid.

    Independent of the closed form: substitutes the two beta densities
    (with ``a0 = a1 - 1``, ``b0 = b1 + 1``) and fits ``log c``.
    """
    Q = np.asarray(grid)
    beta1 = stats.beta.pdf(Q, a1, b1)
    beta0 = stats.beta.pdf(Q, a1 - 1, b1 + 1)
    target = (Q / rho) / ((1 - Q) / (1 - rho))

    def resid(log_c):
        return np.log(beta1 / (np.exp(log_c) * beta0)) - np.log(target)

    sol = optimize.least_squares(resid, x0=[0.0])
    return float(np.exp(sol.x[0])), float(np.max(np.abs(sol.fun)))


class TestBlockParams:
    def test_simplex(self):
        with pytest.raises(InvalidSimplex):
            BlockParams(np.array([0.5, 0.6]), np.eye(2))
        with pytest.raises(InvalidSimplex):
            BlockParams(np.array([1.5, -0.5]), np.eye(2))

    def test_symmetry_and_range(self):
        with pytest.raises(ValueError):
            BlockParams(np.array([0.5, 0.5]), np.array([[0.1, 0.2], [0.3, 0.1]]))
        with pytest.raises(ValueError):
            BlockParams(np.array([0.5, 0.5]), np.array([[1.1, 0.2], [0.2, 0.1]]))
        # the degree-corrected model lets omega exceed 1
        BlockParams(np.array([0.5, 0.5]), np.array([[3.0, 0.2], [0.2, 0.1]]), check_range=False)

    def test_planted(self):
        p = BlockParams.planted(3, 0.2, 0.01)
        assert p.k == 3
        assert np.allclose(np.diag(p.omega), 0.2)
        assert p.omega[0, 1] == 0.01


class TestSamplePartition:
    def test_single_group(self):
        p = sample_partition(50, [1.0], np.random.default_rng(0))
        assert np.all(p.g == 0)

    def test_degenerate_second_group(self):
        p = sample_partition(50, [0.0, 1.0], np.random.default_rng(0))
        assert np.all(p.g == 1)

    def test_binomial_count(self):
        p = sample_partition(4000, [0.5, 0.5], np.random.default_rng(11))
        sigma = math.sqrt(4000 * 0.25)
        assert abs(p.sizes()[0] - 2000) < 4 * sigma

    def test_reproducible(self):
        a = sample_partition(100, [0.3, 0.7], np.random.default_rng(5))
        b = sample_partition(100, [0.3, 0.7], np.random.default_rng(5))
        assert np.array_equal(a.g, b.g)


class TestSampleNetwork:
    def test_zero_omega(self):
        part = Partition(np.array([0, 1, 0, 1]), 2)
        assert sample_network(part, np.zeros((2, 2)), np.random.default_rng(0)).shape == (0, 2)

    def test_complete(self):
        part = Partition(np.array([0, 1, 0, 1, 1]), 2)
        edges = sample_network(part, np.ones((2, 2)), np.random.default_rng(0))
        assert edges.tolist() == [[i, j] for i in range(5) for j in range(i + 1, 5)]

    def test_expected_edge_count(self):
        part = Partition(np.repeat([0, 1], 2000), 2)
        omega = np.array([[0.02, 0.014], [0.014, 0.02]])
        edges = sample_network(part, omega, np.random.default_rng(3))
        expected = 2 * (2000 * 1999 // 2) * 0.02 + 2000 ** 2 * 0.014
        assert expected == pytest.approx(135_960)
        var = 2 * (2000 * 1999 // 2) * 0.02 * 0.98 + 2000 ** 2 * 0.014 * 0.986
        assert abs(edges.shape[0] - expected) < 4 * math.sqrt(var)

    def test_block_rates(self):
        g = np.random.default_rng(1).integers(0, 3, size=600)
        part = Partition(g, 3)
        omega = np.array([[0.1, 0.02, 0.05], [0.02, 0.2, 0.0], [0.05, 0.0, 0.3]])
        edges = sample_network(part, omega, np.random.default_rng(2))
        sizes = part.sizes()
        counts = np.zeros((3, 3))
        np.add.at(counts, (g[edges[:, 0]], g[edges[:, 1]]), 1)
        counts = counts + counts.T - np.diag(np.diag(counts))
        for r in range(3):
            for s in range(r, 3):
                pairs = sizes[r] * (sizes[r] - 1) / 2 if r == s else sizes[r] * sizes[s]
                mean = pairs * omega[r, s]
                sd = math.sqrt(max(pairs * omega[r, s] * (1 - omega[r, s]), 1e-12))
                assert abs(counts[r, s] - mean) <= 4 * sd + 1e-9

    def test_simple_and_sorted(self):
        part = Partition(np.random.default_rng(0).integers(0, 2, 300), 2)
        edges = sample_network(part, np.array([[0.3, 0.1], [0.1, 0.3]]), np.random.default_rng(1))
        assert np.all(edges[:, 0] < edges[:, 1])
        keys = _rank_pairs(edges[:, 0], edges[:, 1])
        assert np.unique(keys).size == keys.size


class TestPairRanking:
    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 10 ** 12))
    def test_round_trip(self, t):
        i, j = _unrank_pairs(np.array([t]))
        assert 0 <= i[0] < j[0]
        assert _rank_pairs(i, j)[0] == t

    def test_distinct_sampler(self):
        rng = np.random.default_rng(0)
        excluded = np.array([0, 3, 5])
        for count in (0, 3, 7):
            out = _sample_distinct(10, count, excluded, rng)
            assert out.size == count
            assert np.unique(out).size == count
            assert not np.isin(out, excluded).any()


class TestSolveNoise:
    def test_dense_weak_signal_parameters(self):
        spec = solve_noise(2.0, 0.0170, a1=1.4)
        assert spec.a0 == pytest.approx(0.4) and spec.b0 == 3.0
        assert spec.c == pytest.approx(0.0865, abs=5e-4)
        c_oracle, resid = coefficient_matching_c(1.4, 2.0, 0.0170)
        assert resid < 1e-9
        assert spec.c == pytest.approx(c_oracle, rel=1e-8)

    def test_half_density(self):
        spec = solve_noise(1.0, 0.5, a1=2.0)
        assert (spec.a0, spec.b0) == (1.0, 2.0)
        assert spec.consistency_error() < 1e-9
        assert spec.c == pytest.approx(coefficient_matching_c(2.0, 1.0, 0.5)[0], rel=1e-8)

    def test_solving_for_a1(self):
        spec = solve_noise(4.0, 0.0255, c=0.1)
        assert spec.c == 0.1
        assert spec.a1 == pytest.approx(coefficient_matching_c_inverse(4.0, 0.0255, 0.1), rel=1e-8)

    def test_infeasible(self):
        with pytest.raises(InfeasibleNoise) as info:
            solve_noise(2.0, 0.3, a1=1.4)
        assert info.value.c_implied > 1

    def test_shape_boundary(self):
        with pytest.raises(InvalidShape):
            solve_noise(2.0, 1e-9, a1=1 + 1e-8)
        with pytest.raises(InvalidShape):
            solve_noise(1e-9, 1e-3, c=1.0)
        with pytest.raises(InvalidShape):
            solve_noise(2.0, 0.1, a1=0.9)
        with pytest.raises(InfeasibleNoise):
            solve_noise(2.0, 0.1, c=0.0)

    def test_exactly_one_of_a1_c(self):
        with pytest.raises(ValueError):
            solve_noise(2.0, 0.1)
        with pytest.raises(ValueError):
            solve_noise(2.0, 0.1, a1=2.0, c=0.5)

    @settings(max_examples=80, deadline=None)
    @given(st.floats(0.1, 10.0), st.floats(1e-3, 0.5), st.floats(1e-3, 1.0))
    def test_consistency_grid(self, b1, rho, c):
        spec = solve_noise(b1, rho, c=c)
        assert spec.consistency_error() < 1e-9

    def test_consistency_by_integration(self):
        """Mixing the two densities with weights rho and 1-rho gives P(edge | Q) = Q."""
        rho = 0.02
        spec = solve_noise(2.0, rho, a1=1.5)
        for Q in (0.1, 0.4, 0.8):
            on = rho * stats.beta.pdf(Q, spec.a1, spec.b1)
            off = (1 - rho) * spec.c * stats.beta.pdf(Q, spec.a0, spec.b0)
            assert on / (on + off) == pytest.approx(Q, rel=1e-9)
        # and the continuous part of beta0 is a proper density
        mass = integrate.quad(lambda q: stats.beta.pdf(q, spec.a0, spec.b0), 0, 1)[0]
        assert mass == pytest.approx(1.0, rel=1e-6)


def coefficient_matching_c_inverse(b1, rho, c):
    """``a1`` for which coefficient matching returns ``c`` (root find on the oracle)."""
    return optimize.brentq(lambda a1: coefficient_matching_c(a1, b1, rho)[0] - c, 1.001, 100.0,
                           xtol=1e-14, rtol=1e-14)


class TestApplyNoise:
    def test_noiseless(self):
        edges = np.array([[0, 1], [1, 3]])
        net = apply_noise(edges, 4, NoiseSpec.exact(), np.random.default_rng(0))
        assert net.to_dense()[0, 1] == 1.0 and net.num_pairs == 2 and net.is_binary()

    def test_empty_edges_half_mass(self):
        spec = NoiseSpec(2.0, 1.0, 1.0, 2.0, 0.5, 0.5)
        counts = [apply_noise(np.zeros((0, 2)), 4, spec, np.random.default_rng(s)).num_pairs
                  for s in range(400)]
        assert np.all(np.array(counts) <= 6)
        assert np.mean(counts) == pytest.approx(3.0, abs=4 * math.sqrt(1.5 / 400))

    def test_stored_pair_count(self):
        rng = np.random.default_rng(4)
        n = 3000
        part = sample_partition(n, [0.5, 0.5], rng)
        edges = sample_network(part, np.array([[0.01, 0.002], [0.002, 0.01]]), rng)
        total = n * (n - 1) // 2
        m = edges.shape[0]
        spec = solve_noise(2.0, m / total, c=0.01)
        net = apply_noise(edges, n, spec, rng)
        mean = m + spec.c * (total - m)
        sd = math.sqrt(spec.c * (1 - spec.c) * (total - m))
        assert abs(net.num_pairs - mean) < 4 * sd

    def test_every_true_edge_is_stored(self):
        inst = generate_benchmark(500, BlockParams.planted(2, 0.05, 0.01), NoiseRequest(b1=2, c=0.1), 9)
        Q = inst.network.to_dense()
        e = inst.truth_edges
        assert np.all(Q[e[:, 0], e[:, 1]] > 0)
        assert np.all((inst.network.q > 0) & (inst.network.q <= 1))


class TestGenerateBenchmark:
    def test_reproducible(self):
        params = BlockParams.planted(2, 0.05, 0.01)
        a = generate_benchmark(400, params, NoiseRequest(b1=2, c=0.2), 17)
        b = generate_benchmark(400, params, NoiseRequest(b1=2, c=0.2), 17)
        assert a.network == b.network
        assert np.array_equal(a.truth_edges, b.truth_edges)
        assert np.array_equal(a.truth_partition.g, b.truth_partition.g)
        assert a.noise == b.noise and a.seed == 17

    def test_noise_solved_against_realized_density(self):
        inst = generate_benchmark(800, BlockParams.planted(2, 0.03, 0.01), NoiseRequest(b1=2, a1=1.4), 2)
        m = inst.truth_edges.shape[0]
        assert inst.noise.rho == m / (800 * 799 / 2)
        assert inst.noise.consistency_error() < 1e-9

    def test_erdos_renyi(self):
        inst = generate_benchmark(300, BlockParams(np.array([1.0]), np.array([[0.05]])),
                                  NoiseRequest(noiseless=True), 0)
        assert np.all(inst.truth_partition.g == 0)
        assert inst.network.is_binary()
