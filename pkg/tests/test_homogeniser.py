from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qhomog import homogeniser as hg
from qhomog import quantum as qc
from qhomog.errors import ScheduleValidationError, SizeError

from oracles import bit_embed, entropy_mp

GRID_DEG = np.arange(0, 91, 10)


def oracle_marginals(eta, contacts):
    """Full-state simulation from logical contacts, bypassing SWAP routing."""
    idx = {l: i for i, l in enumerate(hg.LABELS)}
    rho = np.kron(np.kron(np.diag([1.0, 0]), np.diag([1.0, 0])), np.eye(4) / 4).astype(complex)
    for s, r in contacts:
        u = bit_embed(hg.partial_swap_unitary(eta), idx[s], idx[r], 4)
        rho = u @ rho @ u.conj().T
    z = np.diag([1, -1])
    out = []
    for q in range(4):
        op = np.eye(1)
        for k in range(4):
            op = np.kron(op, z if k == q else np.eye(2))
        out.append(np.trace(rho @ op).real)
    return np.array(out)


def exact_closed_form(cos2: Fraction):
    fb = cos2**2
    fa = 4 * cos2 - 9 * cos2**2 + 8 * cos2**3 - 2 * cos2**4
    return fa, fb, 1 - fb, 1 - fa


class TestPartialSwap:
    def test_identity(self):
        np.testing.assert_array_equal(hg.partial_swap_unitary(0), np.eye(4))

    def test_full_swap(self):
        np.testing.assert_allclose(hg.partial_swap_unitary(np.pi / 2), 1j * qc.SWAP, atol=1e-16)

    def test_quarter(self):
        np.testing.assert_allclose(hg.partial_swap_unitary(np.pi / 4),
                                   np.sqrt(2) / 2 * (np.eye(4) + 1j * qc.SWAP), atol=1e-16)

    @given(st.floats(-10, 10))
    def test_unitary(self, eta):
        u = hg.partial_swap_unitary(eta)
        assert np.max(np.abs(u.conj().T @ u - np.eye(4))) <= 1e-14


class TestClosedForm:
    def test_endpoints(self):
        assert hg.closed_form_marginals(0).as_tuple() == (1.0, 1.0, 0.0, 0.0)
        m = hg.closed_form_marginals(np.pi / 2)
        assert m.f_A == pytest.approx(0, abs=1e-30) and m.f_B == pytest.approx(0, abs=1e-30)

    def test_thirty_degrees_exact_rational(self):
        # cos^2(30 deg) = 3/4 exactly
        fa, fb, fc, fd = exact_closed_form(Fraction(3, 4))
        assert (fa, fb, fc, fd) == (Fraction(87, 128), Fraction(9, 16), Fraction(7, 16),
                                    Fraction(41, 128))
        got = hg.closed_form_marginals(np.radians(30)).as_tuple()
        np.testing.assert_allclose(got, [float(x) for x in (fa, fb, fc, fd)], atol=1e-14)
        assert float(fa) == 0.6796875


class TestSchedule:
    def test_canonical_guess_fails_validation(self):
        sched = hg.schedule_from_contacts(hg.CANONICAL_CONTACTS)
        with pytest.raises(ScheduleValidationError):
            hg.validate_schedule(sched)

    def test_search_finds_valid_orderings(self):
        found = [tuple(s.contacts()) for s in hg.search_schedules()]
        assert sorted(found) == sorted([
            (("B", "C"), ("A", "C"), ("B", "D"), ("A", "D")),
            (("B", "C"), ("B", "D"), ("A", "C"), ("A", "D")),
        ])

    def test_standard_schedule_structure(self):
        sched = hg.standard_schedule()
        assert sched.partial_swap_count() == 4
        assert all(abs(i - j) == 1 for st_ in sched.steps for i, j in st_.pairs)
        assert all(st_.pairs == ((1, 2),) for st_ in sched.steps if st_.kind == "partial_swap")
        assert sched.final_occupancy() == hg.LABELS
        sched.check_structure()
        # each system qubit meets each reservoir qubit exactly once
        assert sorted(sched.contacts()) == [("A", "C"), ("A", "D"), ("B", "C"), ("B", "D")]

    def test_structure_errors(self):
        bad = hg.InteractionSchedule((hg.Step("partial_swap", ((0, 2),)),))
        with pytest.raises(ScheduleValidationError):
            bad.check_structure()
        with pytest.raises(ScheduleValidationError):
            hg.InteractionSchedule((hg.Step("partial_swap", ((1, 2),)),)).check_structure()

    def test_routing_matches_contact_oracle(self):
        sched = hg.standard_schedule()
        for deg in (20, 30, 65):
            eta = np.radians(deg)
            sim = hg.simulate_homogeniser(eta, sched).as_tuple()
            np.testing.assert_allclose(sim, oracle_marginals(eta, sched.contacts()), atol=1e-12)


class TestSimulate:
    def test_identity(self):
        np.testing.assert_allclose(hg.simulate_homogeniser(0).as_tuple(), (1, 1, 0, 0), atol=1e-15)

    def test_interchange(self):
        np.testing.assert_allclose(hg.simulate_homogeniser(np.pi / 2).as_tuple(), (0, 0, 1, 1),
                                   atol=1e-12)

    def test_thirty_degrees(self):
        got = hg.simulate_homogeniser(np.radians(30)).as_tuple()
        np.testing.assert_allclose(got, (0.6796875, 0.5625, 0.4375, 0.3203125), atol=1e-12)

    def test_partial_trace_example(self):
        u = hg.circuit_unitary(np.radians(30), hg.standard_schedule())
        rho = qc.apply_unitary(u, hg.initial_state())
        assert qc.polarisation(qc.partial_trace(rho, {1})) == pytest.approx(0.5625, abs=1e-12)

    @pytest.mark.parametrize("deg", GRID_DEG)
    def test_matches_closed_form_on_grid(self, deg):
        eta = np.radians(deg)
        sim = np.array(hg.simulate_homogeniser(eta).as_tuple())
        np.testing.assert_allclose(sim, hg.closed_form_marginals(eta).as_tuple(), atol=1e-10,
                                   rtol=0)
        assert sim[1] + sim[2] == pytest.approx(1, abs=1e-10)
        assert sim[0] + sim[3] == pytest.approx(1, abs=1e-10)
        assert np.all(sim >= -1e-9) and np.all(sim <= 1 + 1e-9)

    @pytest.mark.parametrize("deg", GRID_DEG)
    def test_circuit_unitary(self, deg):
        u = hg.circuit_unitary(np.radians(deg), hg.standard_schedule())
        assert np.max(np.abs(u.conj().T @ u - np.eye(16))) <= 1e-12


class TestChain:
    def test_zero_coupling(self):
        tr = hg.homogenize_chain(qc.state_from_f(0.4), -0.2, 4, 0.0)
        np.testing.assert_allclose(tr.system_f, [0.4] * 5, atol=1e-14)
        np.testing.assert_allclose(tr.reservoir_distances, 0, atol=1e-14)

    def test_full_swap_exchanges(self):
        tr = hg.homogenize_chain(qc.state_from_f(0.7), -0.3, 1, np.pi / 2)
        assert tr.system_f[-1] == pytest.approx(-0.3, abs=1e-12)
        assert tr.reservoir_final_f[0] == pytest.approx(0.7, abs=1e-12)

    def test_twenty_degrees_five_reservoirs(self):
        # marginal-map oracle cos^10(20 deg), 40-digit value 0.53685643661400788...
        tr = hg.homogenize_chain(qc.KET0, 0.0, 5, np.radians(20))
        assert tr.system_f[-1] == pytest.approx(0.5368564366140079, abs=1e-12)

    def test_cap(self):
        with pytest.raises(SizeError):
            hg.homogenize_chain(qc.KET0, 0.0, 10, 0.1)
        with pytest.raises(ValueError):
            hg.homogenize_chain(qc.KET0, 0.0, 0, 0.1)

    @pytest.mark.parametrize("n", [1, 3, 6, 9])
    def test_full_state_matches_marginal_map(self, n):
        eta = np.radians(17)
        tr = hg.homogenize_chain(qc.state_from_f(0.9), -0.4, n, eta)
        ref = hg.marginal_map_trace(0.9, -0.4, eta, n)
        np.testing.assert_allclose(tr.system_f, ref.system_f, atol=1e-10)
        np.testing.assert_allclose(tr.reservoir_distances, ref.reservoir_distances, atol=1e-10)

    def test_transverse_system_state(self):
        # full-state mode accepts Bloch vectors off the z axis
        psi = np.array([1, 1]) / np.sqrt(2)
        tr = hg.homogenize_chain(np.outer(psi, psi), 0.5, 3, np.radians(40))
        assert tr.system_f[0] == pytest.approx(0, abs=1e-15)
        assert abs(tr.system_f[-1] - 0.5) < 0.5

    def test_distance_shrinks_with_coupling(self):
        dmax = [max(hg.homogenize_chain(qc.KET0, 0.0, 5, np.radians(d)).reservoir_distances)
                for d in range(10, 0, -1)]
        assert all(b <= a for a, b in zip(dmax, dmax[1:]))


class TestMarginalMap:
    def test_zero_coupling(self):
        assert hg.marginal_map_iterate(0.3, 0.9, 0.0, 5) == [0.3] * 5

    def test_full_swap(self):
        assert hg.marginal_map_iterate(1, 0, np.pi / 2, 1) == [pytest.approx(0, abs=1e-16)]

    def test_hundred_steps(self):
        # (cos^2 10 deg)^100, 40-digit value 0.046804950899768294...
        seq = hg.marginal_map_iterate(1, 0, np.radians(10), 100)
        assert seq[-1] == pytest.approx(0.04680495089976829, rel=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(fs=st.floats(-1, 1), fr=st.floats(-1, 1), eta=st.floats(0.01, np.pi / 2 - 0.01),
           n=st.integers(1, 60))
    def test_closed_form_and_monotone(self, fs, fr, eta, n):
        seq = [fs] + hg.marginal_map_iterate(fs, fr, eta, n)
        c2 = np.cos(eta) ** 2
        for k, f in enumerate(seq):
            assert abs(abs(f - fr) - abs(fs - fr) * c2**k) <= 1e-12
        gaps = [abs(f - fr) for f in seq]
        assert all(b <= a + 1e-15 for a, b in zip(gaps, gaps[1:]))


class TestEntropyProfile:
    def test_endpoints(self):
        rows = hg.entropy_profile([0.0, np.pi / 2])
        assert rows[0].entropies == (0.0, 0.0, 1.0, 1.0)
        assert rows[0].total == 2.0
        assert rows[1].total == pytest.approx(2, abs=1e-9)

    def test_forty_five_degrees(self):
        # cos^2 = 1/2: f = (5/8, 1/4, 3/4, 3/8), entropies at 40 digits
        ref = sum(entropy_mp(f) for f in (5 / 8, 1 / 4, 3 / 4, 3 / 8))
        row = hg.entropy_profile([np.pi / 4])[0]
        assert row.total > 2
        assert row.total == pytest.approx(ref, abs=1e-12)
        assert row.theory_total == pytest.approx(3.0902489387842646, abs=1e-12)

    def test_scrambling_signature(self):
        rows = hg.entropy_profile(np.radians(np.arange(6, 85)))
        assert all(r.total > 2 for r in rows)
