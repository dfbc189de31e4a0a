import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qhomog import grape as gr
from qhomog import quantum as qc
from qhomog import spins as sp
from qhomog.gates import target_unitary

from oracles import central_difference, random_hermitian, random_unitary, taylor_expm

DT = 10e-6
OMEGA = 2 * np.pi * 10e3


def direct_segment(h0, omega, dt, phi, s=1.0):
    n = int(np.log2(h0.shape[0]))
    ops = sp.control_operators(n)
    gen = h0 + s * omega * (np.cos(phi) * ops.Ix + np.sin(phi) * ops.Iy)
    return taylor_expm(-1j * gen * dt)


def random_drift(n, rng):
    # shifts within +-15 kHz, couplings up to 100 Hz
    freqs = rng.uniform(-15e3, 15e3, n)
    j = np.triu(rng.uniform(-100, 100, (n, n)), 1)
    return sp.build_internal_hamiltonian(sp.SpinSystem(tuple("ABCD"[:n]), tuple(freqs), j + j.T))


def single_config(h_system, **kw):
    ens = sp.EnvironmentEnsemble.trivial(h_system)
    return gr.OptimizationConfig(ensemble=ens, **kw)


class TestPulseSpec:
    def test_invariants(self):
        with pytest.raises(ValueError):
            gr.PulseSpec(0, DT, OMEGA, [])
        with pytest.raises(ValueError):
            gr.PulseSpec(2, 0.0, OMEGA, [0, 0])
        with pytest.raises(ValueError):
            gr.PulseSpec(2, DT, -1.0, [0, 0])
        with pytest.raises(ValueError):
            gr.PulseSpec(2, DT, OMEGA, [0, 0, 0])
        assert gr.PulseSpec(3000, DT, OMEGA, np.zeros(3000)).duration == pytest.approx(0.03)

    def test_random_init_deterministic(self):
        a, b = gr.random_phases(100, 5), gr.random_phases(100, 5)
        np.testing.assert_array_equal(a, b)
        assert np.all((a >= 0) & (a < 2 * np.pi))


class TestSegmentPropagator:
    def test_zero_phase_is_x(self):
        h0 = sp.build_internal_hamiltonian(sp.crotonic_default())
        model = gr.SegmentModel(h0, OMEGA, DT)
        np.testing.assert_array_equal(model.propagator(0.0), model.X)

    def test_drift_only(self):
        h0 = sp.build_internal_hamiltonian(sp.crotonic_default())
        ref = taylor_expm(-1j * h0 * DT)
        for phi in (0.0, 1.3, 5.0):
            u = gr.segment_propagator(h0, gr.PulseSpec(1, DT, 0.0, [phi]), 0)
            np.testing.assert_allclose(u, ref, atol=1e-10)

    def test_two_spin_example(self):
        h0 = random_drift(2, np.random.default_rng(3))
        u = gr.segment_propagator(h0, gr.PulseSpec(1, DT, OMEGA, [0.7]), 0)
        assert np.max(np.abs(u - direct_segment(h0, OMEGA, DT, 0.7))) <= 1e-10

    def test_index_check(self):
        with pytest.raises(IndexError):
            gr.segment_propagator(np.zeros((2, 2)), gr.PulseSpec(1, DT, OMEGA, [0]), 1)

    @settings(max_examples=100, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.sampled_from([1, 2, 4]))
    def test_decomposition_identity(self, seed, n):
        rng = np.random.default_rng(seed)
        h0 = random_drift(n, rng)
        omega = rng.uniform(0, 2 * OMEGA)
        phi = rng.uniform(0, 2 * np.pi)
        s = rng.choice([0.95, 1.0, 1.05])
        u = gr.SegmentModel(h0, omega, DT, s).propagator(phi)
        assert np.max(np.abs(u - direct_segment(h0, omega, DT, phi, s))) <= 1e-10

    def test_phase_factor_derivative(self):
        model = gr.SegmentModel(np.zeros((16, 16)), OMEGA, DT)
        iz = np.diag(sp.control_operators(4).Iz)
        for phi in np.linspace(0, 2 * np.pi, 7):
            z = model.phase_factors([phi])[0]
            # analytic derivative of the diagonal exp(-i phi m) against -i Iz Z
            dz = -1j * model.iz * z
            np.testing.assert_allclose(dz, -1j * iz * z, atol=1e-14, rtol=0)
            np.testing.assert_allclose(z, np.exp(-1j * phi * iz.real), atol=1e-14, rtol=0)

    def test_no_exponentials_after_precompute(self):
        h0 = sp.build_internal_hamiltonian(sp.crotonic_default())
        model = gr.SegmentModel(h0, OMEGA, DT)
        target = target_unitary("swap_BC", sp.crotonic_default().labels)
        qc.expm_calls.reset()
        model.propagators(gr.random_phases(200, 0))
        model.fidelity_and_gradient(gr.random_phases(200, 1), target)
        assert qc.expm_calls.count == 0


class TestPulsePropagator:
    def test_single_segment(self):
        h0 = random_drift(2, np.random.default_rng(0))
        p = gr.PulseSpec(1, DT, OMEGA, [1.1])
        np.testing.assert_array_equal(gr.pulse_propagator(h0, p), gr.segment_propagator(h0, p, 0))

    def test_commuting_segments(self):
        n, phi = 13, 0.4
        ops = sp.control_operators(2)
        p = gr.PulseSpec(n, DT, OMEGA, [phi] * n)
        u = gr.pulse_propagator(np.zeros((4, 4)), p)
        ref = taylor_expm(-1j * OMEGA * (np.cos(phi) * ops.Ix + np.sin(phi) * ops.Iy) * n * DT)
        np.testing.assert_allclose(u, ref, atol=1e-10)

    def test_time_ordering(self):
        # earliest segment acts first, i.e. stands rightmost
        h0 = random_drift(1, np.random.default_rng(1))
        p = gr.PulseSpec(2, DT, OMEGA, [0.3, 2.0])
        u1 = gr.segment_propagator(h0, p, 0)
        u2 = gr.segment_propagator(h0, p, 1)
        np.testing.assert_allclose(gr.pulse_propagator(h0, p), u2 @ u1, atol=1e-14)

    def test_unitarity_500_segments(self):
        h0 = sp.build_internal_hamiltonian(sp.crotonic_default())
        u = gr.pulse_propagator(h0, gr.random_pulse(500, seed=2))
        assert np.max(np.abs(u.conj().T @ u - np.eye(16))) <= 1e-10

    def test_matches_taylor_product_small_n(self):
        h0 = sp.build_internal_hamiltonian(sp.crotonic_default())
        p = gr.random_pulse(20, seed=4)
        ref = np.eye(16, dtype=complex)
        for phi in p.phases:
            ref = direct_segment(h0, OMEGA, DT, phi) @ ref
        np.testing.assert_allclose(gr.pulse_propagator(h0, p), ref, atol=1e-10)


class TestFidelity:
    def test_examples(self):
        rng = np.random.default_rng(0)
        u = random_unitary(4, rng)
        assert gr.gate_fidelity(u, u) == pytest.approx(1, abs=1e-14)
        assert gr.gate_fidelity(np.exp(0.77j) * u, u) == pytest.approx(1, abs=1e-14)
        assert gr.gate_fidelity(np.eye(4), qc.SWAP) == 0.25

    def test_mismatch(self):
        with pytest.raises(ValueError):
            gr.gate_fidelity(np.eye(2), np.eye(4))

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(0, 4))
    def test_bounds(self, seed, n):
        rng = np.random.default_rng(seed)
        f = gr.gate_fidelity(random_unitary(2**n, rng), random_unitary(2**n, rng))
        assert -1e-12 <= f <= 1 + 1e-12


def fd_gradient(h0, pulse, target, s=1.0, step=1e-6):
    model = gr.SegmentModel(h0, pulse.amplitude, pulse.dt, s)
    return central_difference(lambda x: gr.gate_fidelity(model.total(x), target),
                              np.array(pulse.phases), step)


class TestGradient:
    def test_drift_only_is_zero(self):
        h0 = sp.build_internal_hamiltonian(sp.crotonic_default())
        g = gr.exact_phase_gradient(h0, gr.PulseSpec(10, DT, 0.0, gr.random_phases(10, 0)), 1.0,
                                    random_unitary(16, np.random.default_rng(0)))
        assert np.max(np.abs(g)) <= 1e-12

    @pytest.mark.parametrize("phi", [0.0, 0.4, 1.9, 3.3])
    def test_single_segment_closed_form(self, phi):
        # H0 = 0, target -i sigma_x: Phi = sin^2(theta/2) cos^2(phi), theta = Omega dt
        theta = 2.1
        p = gr.PulseSpec(1, 1.0, theta, [phi])
        w = -1j * qc.SIGMA_X
        model = gr.SegmentModel(np.zeros((2, 2)), theta, 1.0)
        fid, grad = model.fidelity_and_gradient(p.phases, w)
        assert fid == pytest.approx(np.sin(theta / 2) ** 2 * np.cos(phi) ** 2, abs=1e-14)
        assert grad[0] == pytest.approx(-np.sin(theta / 2) ** 2 * np.sin(2 * phi), abs=1e-14)

    def test_fidelity_matches_propagator(self):
        h0 = sp.build_internal_hamiltonian(sp.crotonic_default())
        p = gr.random_pulse(30, seed=9)
        w = target_unitary("swap_BC", sp.crotonic_default().labels)
        fid, _ = gr.SegmentModel(h0, OMEGA, DT).fidelity_and_gradient(p.phases, w)
        assert fid == pytest.approx(gr.gate_fidelity(gr.pulse_propagator(h0, p), w), abs=1e-13)

    @pytest.mark.parametrize("n_spins, seed", [(1, 0), (1, 1), (2, 2), (2, 3), (4, 4), (4, 5)])
    def test_against_finite_differences(self, n_spins, seed):
        rng = np.random.default_rng(seed)
        if n_spins == 4:
            h0 = sp.build_internal_hamiltonian(sp.crotonic_default())
        else:
            h0 = random_drift(n_spins, rng)
        p = gr.PulseSpec(50, DT, OMEGA, rng.uniform(0, 2 * np.pi, 50))
        w = random_unitary(2**n_spins, rng)
        s = 1.05
        exact = gr.exact_phase_gradient(h0, p, s, w)
        fd = fd_gradient(h0, p, w, s)
        scale = np.max(np.abs(exact))
        # elementwise, with components far below the gradient scale compared absolutely
        rel = np.abs(exact - fd) / np.maximum(np.abs(exact), 1e-3 * scale)
        assert np.max(rel) <= 1e-6


class TestRobustObjective:
    def test_degenerate_grid(self):
        h0 = sp.build_internal_hamiltonian(sp.crotonic_default())
        p = gr.random_pulse(40, seed=1)
        w = target_unitary("swap_BC", sp.crotonic_default().labels)
        rep = gr.robust_objective(p, single_config(sp.crotonic_default()), w)
        assert rep.fidelity == pytest.approx(gr.gate_fidelity(gr.pulse_propagator(h0, p), w),
                                             abs=1e-14)
        np.testing.assert_allclose(rep.gradient, gr.exact_phase_gradient(h0, p, 1.0, w),
                                   atol=1e-14)

    def test_identical_members(self):
        ens = sp.environment_ensemble(sp.crotonic_default(), np.zeros((5, 4)), {0, 1, 2})
        cfg = gr.OptimizationConfig(ensemble=ens)
        p = gr.random_pulse(40, seed=2)
        w = target_unitary("swap_BC", sp.crotonic_default().labels)
        rep = gr.robust_objective(p, cfg, w)
        assert len(rep.member_fidelities) == 16
        assert rep.fidelity == pytest.approx(rep.member_fidelities[0], abs=1e-14)

    def test_weighted_mean(self):
        # spin-1 member A sees exact x rotation (Phi=1); member B is detuned to Phi=0.9
        theta = np.pi
        target = -1j * qc.SIGMA_X
        # find the detuning giving Phi = 0.9 for a single hard pulse
        def fid_at(nu):
            h = 2 * np.pi * nu * qc.SIGMA_Z / 2 + theta * qc.SIGMA_X / 2
            return gr.gate_fidelity(taylor_expm(-1j * h), target)
        lo, hi = 0.0, 0.5
        for _ in range(80):
            mid = (lo + hi) / 2
            lo, hi = (mid, hi) if fid_at(mid) > 0.9 else (lo, mid)
        members = (sp.EnsembleMember(sp.single_spin(lo), 1, ()),
                   sp.EnsembleMember(sp.single_spin(0.0), 3, ()))
        cfg = gr.OptimizationConfig(ensemble=sp.EnvironmentEnsemble(members))
        rep = gr.robust_objective(gr.PulseSpec(1, 1.0, theta, [0.0]), cfg, target)
        np.testing.assert_allclose(rep.member_fidelities, [0.9, 1.0], atol=1e-12)
        assert rep.fidelity == pytest.approx(0.975, abs=1e-12)

    def test_rf_grid_weights(self):
        cfg = single_config(sp.single_spin(0.0), rf_scales=(0.9, 1.0, 1.1))
        rep = gr.robust_objective(gr.PulseSpec(1, 1.0, np.pi, [0.0]), cfg, -1j * qc.SIGMA_X)
        expected = np.mean([np.sin(s * np.pi / 2) ** 2 for s in (0.9, 1.0, 1.1)])
        assert rep.fidelity == pytest.approx(expected, abs=1e-14)
        assert all(-1e-12 <= f <= 1 + 1e-12 for f in rep.member_fidelities)

    def test_threads_bit_identical(self):
        ens = sp.environment_ensemble(sp.crotonic_default(),
                                      np.array([[0, 0, 0, 127.0]] * 3 + [[0, 0, 160, 0],
                                                                          [0, 158, 0, 0]]),
                                      {0, 1, 2})
        w = target_unitary("swap_BC", sp.crotonic_default().labels)
        p = gr.random_pulse(20, seed=3)
        a = gr.robust_objective(p, gr.OptimizationConfig(ensemble=ens, threads=1), w)
        b = gr.robust_objective(p, gr.OptimizationConfig(ensemble=ens, threads=4), w)
        assert a.fidelity == b.fidelity
        np.testing.assert_array_equal(a.gradient, b.gradient)

    def test_config_validation(self):
        ens = sp.EnvironmentEnsemble.trivial(sp.single_spin())
        for bad in ({"rf_scales": ()}, {"rf_scales": (1.0, -0.1)}, {"target_fidelity": 0.0},
                    {"target_fidelity": 1.5}, {"method": "newton"}):
            with pytest.raises(ValueError):
                gr.OptimizationConfig(ensemble=ens, **bad)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            gr.robust_objective(gr.random_pulse(3), single_config(sp.single_spin()), np.eye(4))


def pi_rotation_problem(seed):
    n = 20
    omega = np.pi / (n * DT)
    return (-1j * qc.SIGMA_X, single_config(sp.single_spin(0.0), target_fidelity=1 - 1e-6,
                                            max_iterations=200),
            gr.random_pulse(n, DT, omega, seed))


class TestOptimizer:
    def test_already_optimal(self):
        h0 = sp.build_internal_hamiltonian(sp.crotonic_default())
        p = gr.random_pulse(30, seed=0)
        target = gr.pulse_propagator(h0, p)
        _, rep = gr.optimize_pulse(target, single_config(sp.crotonic_default()), p)
        assert rep.iterations == 0 and rep.converged
        assert rep.fidelity == pytest.approx(1, abs=1e-12)

    @pytest.mark.parametrize("method", ["gradient", "lbfgs"])
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_pi_rotation(self, method, seed):
        target, cfg, init = pi_rotation_problem(seed)
        cfg.method = method
        pulse, rep = gr.optimize_pulse(target, cfg, init)
        assert rep.converged and rep.iterations <= 200
        assert rep.fidelity >= 1 - 1e-6
        assert gr.gate_fidelity(gr.pulse_propagator(np.zeros((2, 2)), pulse), target) >= 1 - 1e-6
        assert all(b >= a for a, b in zip(rep.history, rep.history[1:]))

    def test_deterministic(self):
        target, cfg, init = pi_rotation_problem(7)
        a = gr.optimize_pulse(target, cfg, init)
        b = gr.optimize_pulse(target, cfg, init)
        np.testing.assert_array_equal(a[0].phases, b[0].phases)
        assert a[1].history == b[1].history

    def test_not_converged_returns_best(self):
        # two segments of a quarter turn cannot reach a full pi rotation
        cfg = single_config(sp.single_spin(0.0), max_iterations=30)
        init = gr.random_pulse(2, 1.0, np.pi / 4, seed=0)
        pulse, rep = gr.optimize_pulse(-1j * qc.SIGMA_X, cfg, init)
        assert not rep.converged
        assert rep.stop_reason in ("max_iterations", "gradient_tolerance", "line_search_failed")
        assert rep.fidelity >= rep.history[0]
        assert np.all((pulse.phases >= 0) & (pulse.phases < 2 * np.pi))

    def test_callback(self):
        target, cfg, init = pi_rotation_problem(3)
        seen = []
        gr.optimize_pulse(target, cfg, init, callback=lambda it, f: seen.append((it, f)))
        assert [it for it, _ in seen] == list(range(1, len(seen) + 1))

    def test_monotone_on_crotonic(self):
        h = sp.crotonic_default()
        cfg = single_config(h, max_iterations=15, rf_scales=(0.95, 1.05), method="lbfgs")
        w = target_unitary("swap_BC", h.labels)
        _, rep = gr.optimize_pulse(w, cfg, gr.random_pulse(200, seed=1))
        assert all(b >= a for a, b in zip(rep.history, rep.history[1:]))
        assert rep.history[-1] > rep.history[0]
