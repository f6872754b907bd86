"""EM driver, parameter updates and the edge posterior ``t``."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uncertnet import (
    BlockParams,
    EMOptions,
    NoiseRequest,
    aligned_accuracy,
    compute_t,
    em_fit,
    enumerate_posterior,
    generate_benchmark,
    posterior_at,
    update_gamma,
    update_omega,
    validate,
)
from uncertnet.errors import AllRestartsDegenerate, DegenerateRho

rhos = st.floats(1e-4, 0.9)
probs = st.floats(0.0, 1.0)


def t_by_hand(q, w, rho):
    on = q * w / rho
    return on / (on + (1 - q) * (1 - w) / (1 - rho))


class TestComputeT:
    def test_worked_value(self):
        t = compute_t(0.9, 0.02, 0.017)
        assert t == pytest.approx(0.9139, abs=5e-5)
        assert t == pytest.approx(t_by_hand(0.9, 0.02, 0.017), rel=1e-14)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(1e-3, 0.99), st.floats(1e-3, 0.99))
    def test_prior_and_evidence_cancel(self, rho, w):
        assert compute_t(rho, w, rho) == pytest.approx(w, rel=1e-12)

    def test_endpoints(self):
        assert compute_t(1.0, 0.3, 0.1) == 1.0
        assert compute_t(0.0, 0.3, 0.1) == 0.0

    def test_degenerate_density(self):
        for rho in (0.0, 1.0):
            with pytest.raises(DegenerateRho):
                compute_t(0.5, 0.1, rho)

    @settings(max_examples=100, deadline=None)
    @given(probs, probs, st.floats(0.0, 1.0), rhos)
    def test_monotone(self, q1, q2, w, rho):
        lo, hi = sorted((q1, q2))
        assert compute_t(lo, w, rho) <= compute_t(hi, w, rho) + 1e-15
        assert compute_t(w, lo, rho) <= compute_t(w, hi, rho) + 1e-15

    @settings(max_examples=50, deadline=None)
    @given(probs, st.floats(1e-4, 0.1), rhos, st.floats(0.1, 10.0))
    def test_degree_scaling(self, q, w, rho, alpha):
        a = compute_t(q, w, rho, dd=0.5, clamp=True)
        b = compute_t(q, w / alpha ** 2, rho, dd=0.5 * alpha ** 2, clamp=True)
        assert a == pytest.approx(b, rel=1e-12, abs=1e-300)

    def test_degree_corrected_clamp(self):
        # d_i d_j omega above 1 is capped just below 1, so t stays a probability
        assert compute_t(0.5, 0.9, 0.2, dd=4.0, clamp=True) < 1.0


class TestUpdateGamma:
    def test_uniform(self):
        np.testing.assert_allclose(update_gamma(np.full((6, 3), 1 / 3)), 1 / 3)

    def test_counting(self):
        node = np.array([[1, 0], [1, 0], [1, 0], [0, 1]], dtype=float)
        assert update_gamma(node).tolist() == [0.75, 0.25]

    def test_idempotent(self):
        node = np.random.default_rng(0).dirichlet(np.ones(3), size=10)
        np.testing.assert_array_equal(update_gamma(node), update_gamma(node))


class TestUpdateOmega:
    def test_all_mass_in_one_group(self):
        net = validate([(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)], 5)
        node = np.tile([1.0, 0.0], (5, 1))
        pair = np.zeros((3, 2, 2))
        pair[:, 0, 0] = 1.0
        omega, ok = update_omega(pair, node, net, net.density())
        assert ok
        assert omega[0, 0] == pytest.approx(2 * 3 / 25, rel=1e-14)
        assert omega[1, 1] == 0.0 and omega[0, 1] == 0.0

    def test_five_node_single_group(self):
        net = validate([(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0)], 5)
        omega, ok = update_omega(np.ones((4, 1, 1)), np.ones((5, 1)), net, net.density())
        assert ok and omega[0, 0] == pytest.approx(8 / 25, rel=1e-14)

    def test_planted_marginals_recover_generating_omega(self):
        params = BlockParams.planted(2, 0.02, 0.014)
        inst = generate_benchmark(4000, params, NoiseRequest(b1=2, a1=1.4), 3)
        net, g = inst.network, inst.truth_partition.g
        node = np.eye(2)[g]
        pair = np.einsum("pr,ps->prs", node[net.i], node[net.j])
        omega, ok = update_omega(pair, node, net, net.density())
        assert ok
        sizes = inst.truth_partition.sizes()
        for r, s, w in ((0, 0, 0.02), (1, 1, 0.02), (0, 1, 0.014)):
            n_pairs = sizes[r] * (sizes[r] - 1) / 2 if r == s else sizes[r] * sizes[s]
            sigma = np.sqrt(w * (1 - w) / n_pairs)
            assert abs(omega[r, s] - w) < 3 * sigma + 2 * w / sizes[r]

    def test_degree_corrected_with_unit_degrees(self):
        inst = generate_benchmark(300, BlockParams.planted(2, 0.1, 0.02), NoiseRequest(b1=2, c=0.1), 0)
        net = inst.network
        rng = np.random.default_rng(0)
        node = rng.dirichlet(np.ones(2), size=net.n)
        pair = rng.dirichlet(np.ones(4), size=net.num_pairs).reshape(-1, 2, 2)
        a, _ = update_omega(pair, node, net, net.density(), mode="plain")
        b, _ = update_omega(pair, node, net, net.density(), np.ones(net.n), mode="dc")
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)

    @pytest.mark.parametrize("mode", ["plain", "dc"])
    def test_bracketing_fallback_finds_the_fixed_point(self, mode):
        """Cutting the plain iteration short hands over to root finding with the same answer."""
        inst = generate_benchmark(300, BlockParams.planted(2, 0.1, 0.02), NoiseRequest(b1=2, c=0.1), 0)
        net = inst.network
        rho = net.density()
        node = np.eye(2)[inst.truth_partition.g]
        pair = np.einsum("pr,ps->prs", node[net.i], node[net.j])
        slow, ok_slow = update_omega(pair, node, net, rho, mode=mode, tol=1e-13, max_iter=100000)
        fast, ok_fast = update_omega(pair, node, net, rho, mode=mode, tol=1e-13, max_iter=2)
        assert ok_slow and ok_fast
        np.testing.assert_allclose(fast, slow, rtol=1e-9, atol=1e-12)
        again, _ = update_omega(pair, node, net, rho, mode=mode, omega_init=fast, tol=1e-13, max_iter=1)
        np.testing.assert_allclose(again, fast, rtol=1e-9, atol=1e-12)


class TestEMFit:
    def test_noiseless_strong_instance(self):
        inst = generate_benchmark(500, BlockParams.planted(2, 0.1, 0.001), NoiseRequest(noiseless=True), 1)
        fit = em_fit(inst.network, 2, restarts=3, seed=0)
        assert aligned_accuracy(fit.hard_partition, inst.truth_partition) == 1.0
        assert fit.converged and fit.restarts_used == 3 and len(fit.restart_bounds) == 3

    def test_single_group(self):
        inst = generate_benchmark(200, BlockParams.planted(2, 0.1, 0.02), NoiseRequest(b1=2, c=0.1), 2)
        fit = em_fit(inst.network, 1, restarts=2, seed=0)
        assert fit.params.gamma.tolist() == [1.0]
        omega, _ = update_omega(np.ones((inst.network.num_pairs, 1, 1)), np.ones((200, 1)),
                                inst.network, inst.network.density())
        assert fit.params.omega[0, 0] == pytest.approx(omega[0, 0], rel=1e-6)
        assert np.all(fit.hard_partition.g == 0)

    def test_deterministic(self):
        inst = generate_benchmark(300, BlockParams.planted(2, 0.08, 0.01), NoiseRequest(b1=2, c=0.05), 3)
        a = em_fit(inst.network, 2, restarts=2, seed=11)
        b = em_fit(inst.network, 2, restarts=2, seed=11)
        np.testing.assert_array_equal(a.params.omega, b.params.omega)
        np.testing.assert_array_equal(a.marginals.node, b.marginals.node)
        assert a.bound_trace == b.bound_trace and a.seed == 11

    def test_threads_do_not_change_the_result(self):
        inst = generate_benchmark(300, BlockParams.planted(2, 0.08, 0.01), NoiseRequest(b1=2, c=0.05), 3)
        a = em_fit(inst.network, 2, restarts=3, seed=5, threads=1)
        b = em_fit(inst.network, 2, restarts=3, seed=5, threads=3)
        np.testing.assert_array_equal(a.marginals.node, b.marginals.node)
        assert a.restart_bounds == b.restart_bounds

    def test_parameters_stay_valid(self):
        inst = generate_benchmark(300, BlockParams.planted(3, 0.1, 0.01), NoiseRequest(b1=2, c=0.05), 4)
        for max_iters in (1, 2, 5):
            fit = em_fit(inst.network, 3, restarts=1, seed=0, max_iters=max_iters)
            assert fit.params.gamma.sum() == pytest.approx(1.0, abs=1e-12)
            assert np.all((fit.params.omega >= 0) & (fit.params.omega <= 1))

    def test_hard_partition_is_argmax(self):
        inst = generate_benchmark(200, BlockParams.planted(2, 0.1, 0.01), NoiseRequest(b1=2, c=0.05), 5)
        fit = em_fit(inst.network, 2, restarts=1, seed=0)
        np.testing.assert_array_equal(fit.hard_partition.g, np.argmax(fit.marginals.node, axis=1))

    def test_degree_corrected_runs(self):
        inst = generate_benchmark(500, BlockParams.planted(2, 0.1, 0.002), NoiseRequest(b1=1, c=0.01), 6)
        fit = em_fit(inst.network, 2, "dc", restarts=2, seed=0)
        assert fit.mode == "dc"
        assert aligned_accuracy(fit.hard_partition, inst.truth_partition) > 0.95

    def test_all_restarts_degenerate(self):
        inst = generate_benchmark(200, BlockParams.planted(2, 0.1, 0.02), NoiseRequest(b1=2, c=0.1), 1)
        start = BlockParams(np.array([1 - 1e-9, 1e-9]), np.full((2, 2), 0.06))
        with pytest.raises(AllRestartsDegenerate):
            em_fit(inst.network, 2, restarts=2, seed=0, init=start)

    def test_options_validation(self):
        with pytest.raises(ValueError):
            EMOptions(tol_em=0.0)
        with pytest.raises(ValueError):
            EMOptions(e_step="gibbs")
        net = validate([(0, 1, 0.5)], 4)
        with pytest.raises(ValueError):
            em_fit(net, 2, "dc", e_step="exact")
        with pytest.raises(DegenerateRho):
            em_fit(validate([], 4), 2)

    def test_partition_start(self):
        inst = generate_benchmark(400, BlockParams.planted(2, 0.08, 0.005), NoiseRequest(b1=2, c=0.02), 7)
        fit = em_fit(inst.network, 2, restarts=1, seed=0, init=inst.truth_partition)
        assert aligned_accuracy(fit.hard_partition, inst.truth_partition) > 0.97


class TestExactEStep:
    @pytest.mark.parametrize("seed", range(6))
    def test_monotone_log_evidence(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(4, 9))
        pairs = [(i, j, float(rng.uniform(0.05, 1))) for i in range(n) for j in range(i + 1, n)
                 if rng.random() < 0.6]
        net = validate(pairs or [(0, 1, 0.5)], n)
        fit = em_fit(net, 2, restarts=1, seed=seed, e_step="exact", max_iters=30)
        trace = np.array(fit.bound_trace)
        assert np.all(np.diff(trace) >= -1e-10)
        # the trace holds exact log evidence values
        post = enumerate_posterior(net, 2, fit.params)
        assert trace[-1] == pytest.approx(post.log_marginal_likelihood, abs=1e-10)


def test_known_parameter_posterior():
    inst = generate_benchmark(1000, BlockParams.planted(2, 0.05, 0.002), NoiseRequest(b1=2, c=0.01), 8)
    res = posterior_at(inst.network, inst.params, seed=0, restarts=2)
    assert res.iterations == 0 and res.params is inst.params
    assert aligned_accuracy(res.hard_partition, inst.truth_partition) > 0.95


def test_single_restart_options_object():
    inst = generate_benchmark(200, BlockParams.planted(2, 0.1, 0.01), NoiseRequest(noiseless=True), 9)
    opts = EMOptions(restarts=1, seed=3, max_iters=50)
    a = em_fit(inst.network, 2, options=opts)
    b = em_fit(inst.network, 2, options=opts, seed=3)
    np.testing.assert_array_equal(a.marginals.node, b.marginals.node)
