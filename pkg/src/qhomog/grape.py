"""Phase-only GRAPE with exact gradients.

With a fixed RF amplitude the only control in segment j is the phase
phi_j, and the segment propagator factorises as

    U_j = Z_j X Z_j^dagger,   Z_j = exp(-i phi_j Iz),   X = exp(-i (H0 + s Omega Ix) dt)

Iz is diagonal in the computational basis, so after X is computed once per
(H0, s) every U_j is an elementwise product ``z_j[:, None] * X * conj(z_j)[None, :]``.
The derivative dU_j/dphi_j = i [U_j, Iz] is exact and costs nothing extra.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import quantum as qc
from .spins import EnvironmentEnsemble, build_internal_hamiltonian, control_operators

log = logging.getLogger(__name__)

DEFAULT_AMPLITUDE = 2 * np.pi * 10e3  # rad/s
DEFAULT_DT = 10e-6  # s
DEFAULT_RF_SCALES = (0.95, 1.0, 1.05)


@dataclass(frozen=True)
class PulseSpec:
    n_segments: int
    dt: float
    amplitude: float
    phases: np.ndarray = field(compare=False)

    def __post_init__(self):
        ph = np.array(self.phases, dtype=float, copy=True).reshape(-1)
        if self.n_segments < 1:
            raise ValueError("n_segments must be at least 1")
        if not self.dt > 0:
            raise ValueError("segment duration must be positive")
        if not self.amplitude >= 0:
            raise ValueError("amplitude must be non-negative")
        if ph.shape != (self.n_segments,):
            raise ValueError(f"expected {self.n_segments} phases, got {ph.size}")
        if not np.all(np.isfinite(ph)):
            raise ValueError("phases must be finite")
        ph.setflags(write=False)
        object.__setattr__(self, "phases", ph)

    @property
    def duration(self) -> float:
        return self.n_segments * self.dt

    def with_phases(self, phases) -> "PulseSpec":
        return replace(self, phases=np.asarray(phases, dtype=float))

    def __eq__(self, other):
        if not isinstance(other, PulseSpec):
            return NotImplemented
        return (self.n_segments == other.n_segments and self.dt == other.dt
                and self.amplitude == other.amplitude
                and np.array_equal(self.phases, other.phases))


def random_phases(n: int, seed: int | None) -> np.ndarray:
    return np.random.default_rng(seed).uniform(0.0, 2 * np.pi, size=n)


def random_pulse(n_segments: int, dt: float = DEFAULT_DT, amplitude: float = DEFAULT_AMPLITUDE,
                 seed: int | None = 0) -> PulseSpec:
    return PulseSpec(n_segments, dt, amplitude, random_phases(n_segments, seed))


class SegmentModel:
    """Precomputed X for one (H0, amplitude, dt, rf scale) combination.

    Building the model costs one matrix exponential; every segment
    propagator after that is elementwise arithmetic.
    """

    def __init__(self, h0: np.ndarray, amplitude: float, dt: float, rf_scale: float = 1.0):
        h0 = np.asarray(h0, dtype=complex)
        n = int(round(np.log2(h0.shape[0])))
        ops = control_operators(n)
        self.dim = h0.shape[0]
        self.iz = np.real(np.diag(ops.Iz)).copy()
        self.X = qc.expm_skew_hermitian(-1j * (h0 + rf_scale * amplitude * ops.Ix) * dt)

    def phase_factors(self, phases) -> np.ndarray:
        """Diagonals of Z_j, shape (N, d)."""
        return np.exp(-1j * np.outer(np.atleast_1d(phases), self.iz))

    def propagators(self, phases) -> np.ndarray:
        z = self.phase_factors(phases)
        return z[:, :, None] * self.X[None, :, :] * z.conj()[:, None, :]

    def propagator(self, phi: float) -> np.ndarray:
        return self.propagators([phi])[0]

    def total(self, phases) -> np.ndarray:
        u = np.eye(self.dim, dtype=complex)
        for uj in self.propagators(phases):
            u = uj @ u
        return u

    def fidelity_and_gradient(self, phases, target: np.ndarray) -> tuple[float, np.ndarray]:
        """Fidelity |tr(W^dag U)|^2 / d^2 and its exact phase gradient.

        With forward products F_j = U_j...U_1 and back-propagated
        L_j = W^dag U_N...U_{j+1}, let h_j = tr(L_j Iz F_j). Then
        d tr(W^dag U)/d phi_j = i (h_{j-1} - h_j).
        """
        us = self.propagators(phases)
        n, d = us.shape[0], self.dim
        fwd = np.empty((n + 1, d, d), dtype=complex)
        bwd = np.empty((n + 1, d, d), dtype=complex)
        fwd[0] = np.eye(d)
        for j in range(n):
            fwd[j + 1] = us[j] @ fwd[j]
        bwd[n] = np.asarray(target).conj().T
        for j in range(n, 0, -1):
            bwd[j - 1] = bwd[j] @ us[j - 1]
        g = np.trace(bwd[n] @ fwd[n])
        h = np.einsum("jkm,jmk,k->j", fwd, bwd, self.iz)
        dg = 1j * (h[:-1] - h[1:])
        fid = float(abs(g) ** 2 / d**2)
        grad = 2.0 * np.real(np.conj(g) * dg) / d**2
        return fid, grad


def segment_propagator(h0, pulse: PulseSpec, j: int, rf_scale: float = 1.0) -> np.ndarray:
    if not 0 <= j < pulse.n_segments:
        raise IndexError(f"segment {j} out of range for {pulse.n_segments} segments")
    model = SegmentModel(h0, pulse.amplitude, pulse.dt, rf_scale)
    return model.propagator(pulse.phases[j])


def pulse_propagator(h0, pulse: PulseSpec, rf_scale: float = 1.0) -> np.ndarray:
    """Time-ordered product U_N ... U_1 (earliest segment rightmost)."""
    return SegmentModel(h0, pulse.amplitude, pulse.dt, rf_scale).total(pulse.phases)


def gate_fidelity(u_actual, u_target) -> float:
    u = np.asarray(u_actual)
    w = np.asarray(u_target)
    if u.shape != w.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {w.shape}")
    d = u.shape[0]
    return float(abs(np.trace(w.conj().T @ u)) ** 2 / d**2)


def exact_phase_gradient(h0, pulse: PulseSpec, rf_scale: float, u_target) -> np.ndarray:
    model = SegmentModel(h0, pulse.amplitude, pulse.dt, rf_scale)
    return model.fidelity_and_gradient(pulse.phases, u_target)[1]


# --- robustness averaging -------------------------------------------------

@dataclass
class OptimizationConfig:
    ensemble: EnvironmentEnsemble
    rf_scales: Sequence[float] = (1.0,)
    target_fidelity: float = 0.999
    max_iterations: int = 500
    gradient_tolerance: float = 1e-10
    seed: int = 0
    method: str = "gradient"  # or "lbfgs"
    coupling_model: str = "isotropic"
    memory: int = 20
    threads: int | None = 1

    def __post_init__(self):
        self.rf_scales = tuple(float(s) for s in self.rf_scales)
        if not self.rf_scales or min(self.rf_scales) <= 0:
            raise ValueError("rf_scales must be nonempty and positive")
        if not 0 < self.target_fidelity <= 1:
            raise ValueError("target_fidelity must lie in (0, 1]")
        if self.method not in ("lbfgs", "gradient"):
            raise ValueError(f"unknown optimizer method {self.method!r}")


@dataclass
class FidelityReport:
    member_fidelities: list[float]
    grid: list[tuple[int, float]]  # (ensemble member index, rf scale) per entry
    weights: list[float]
    fidelity: float
    gradient: np.ndarray = field(repr=False)
    iterations: int = 0
    converged: bool = False
    stop_reason: str = ""
    history: list[float] = field(default_factory=list, repr=False)

    @property
    def gradient_norm(self) -> float:
        return float(np.linalg.norm(self.gradient))

    @property
    def min_fidelity(self) -> float:
        return min(self.member_fidelities)


class RobustObjective:
    """Weighted mean fidelity over (ensemble member x rf scale).

    Member weights are the ensemble multiplicities, rf scales are weighted
    uniformly; the reduction runs in grid order so results are reproducible.
    """

    def __init__(self, amplitude: float, dt: float, config: OptimizationConfig, u_target):
        self.target = np.asarray(u_target, dtype=complex)
        self.threads = config.threads
        hams = config.ensemble.hamiltonians(config.coupling_model)
        if hams[0].shape != self.target.shape:
            raise ValueError(f"target shape {self.target.shape} does not match "
                             f"Hamiltonian shape {hams[0].shape}")
        self.grid, self.models, w = [], [], []
        for i, (member, h0) in enumerate(zip(config.ensemble.members, hams)):
            for s in config.rf_scales:
                self.grid.append((i, s))
                self.models.append(SegmentModel(h0, amplitude, dt, s))
                w.append(member.weight / len(config.rf_scales))
        w = np.array(w, dtype=float)
        self.weights = w / w.sum()
        self.evaluations = 0

    def __call__(self, phases) -> tuple[float, np.ndarray, list[float]]:
        self.evaluations += 1
        if self.threads is not None and self.threads > 1 and len(self.models) > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                results = list(pool.map(lambda m: m.fidelity_and_gradient(phases, self.target),
                                        self.models))
        else:
            results = [m.fidelity_and_gradient(phases, self.target) for m in self.models]
        fids = [r[0] for r in results]
        fid = 0.0
        grad = np.zeros(len(phases))
        for wk, (fk, gk) in zip(self.weights, results):
            fid += wk * fk
            grad += wk * gk
        return float(fid), grad, fids

    def report(self, phases) -> FidelityReport:
        fid, grad, fids = self(phases)
        return FidelityReport(fids, list(self.grid), list(self.weights), fid, grad)


def robust_objective(pulse: PulseSpec, config: OptimizationConfig, u_target) -> FidelityReport:
    return RobustObjective(pulse.amplitude, pulse.dt, config, u_target).report(pulse.phases)


# --- optimiser ------------------------------------------------------------

def _lbfgs_direction(grad, s_hist, y_hist):
    # two-loop recursion on the minimisation problem of -F; returns an ascent direction
    q = -grad.copy()
    alphas = []
    for s, y in zip(reversed(s_hist), reversed(y_hist)):
        rho = 1.0 / (y @ s)
        a = rho * (s @ q)
        q -= a * y
        alphas.append((rho, a))
    if s_hist:
        s, y = s_hist[-1], y_hist[-1]
        q *= (s @ y) / (y @ y)
    for (s, y), (rho, a) in zip(zip(s_hist, y_hist), reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def optimize_pulse(u_target, config: OptimizationConfig, pulse_init: PulseSpec,
                   callback=None) -> tuple[PulseSpec, FidelityReport]:
    """Maximise the robust fidelity over the segment phases.

    Ascent directions come from plain gradients or L-BFGS; every step is
    accepted only after a backtracking (Armijo) line search, so the
    objective never decreases between accepted iterates.
    """
    objective = RobustObjective(pulse_init.amplitude, pulse_init.dt, config, u_target)
    phi = np.array(pulse_init.phases, dtype=float)
    fid, grad, fids = objective(phi)
    history = [fid]
    s_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []
    step = None
    reason = "max_iterations"
    it = 0
    armijo = 1e-4
    while True:
        if fid >= config.target_fidelity:
            reason = "target_fidelity"
            break
        if np.linalg.norm(grad) < config.gradient_tolerance:
            reason = "gradient_tolerance"
            break
        if it >= config.max_iterations:
            break
        use_qn = config.method == "lbfgs" and s_hist
        direction = _lbfgs_direction(grad, s_hist, y_hist) if use_qn else grad.copy()
        slope = direction @ grad
        if slope <= 0:
            s_hist.clear()
            y_hist.clear()
            direction, slope, use_qn = grad.copy(), grad @ grad, False
        if use_qn:
            t = 1.0
        elif step is None:
            t = 0.1 / np.max(np.abs(direction))
        else:
            t = 2.0 * step
        accepted = False
        for _ in range(60):
            trial = phi + t * direction
            f_new, g_new, fids_new = objective(trial)
            if f_new >= fid + armijo * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            if use_qn:
                s_hist.clear()
                y_hist.clear()
                continue
            reason = "line_search_failed"
            break
        assert f_new >= fid, "accepted step decreased the objective"
        s = trial - phi
        y = grad - g_new  # gradient change of the minimised quantity -F
        if s @ y > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            s_hist.append(s)
            y_hist.append(y)
            if len(s_hist) > config.memory:
                s_hist.pop(0)
                y_hist.pop(0)
        if not use_qn:
            step = t
        phi, fid, grad, fids = trial, f_new, g_new, fids_new
        history.append(fid)
        it += 1
        if callback is not None:
            callback(it, fid)
        if it % 50 == 0:
            log.info("iteration %d: fidelity %.8f", it, fid)
    report = FidelityReport(fids, list(objective.grid), list(objective.weights), fid, grad,
                            iterations=it, converged=fid >= config.target_fidelity,
                            stop_reason=reason, history=history)
    return pulse_init.with_phases(np.mod(phi, 2 * np.pi)), report


def default_config(ensemble: EnvironmentEnsemble, **kwargs) -> OptimizationConfig:
    kwargs.setdefault("rf_scales", DEFAULT_RF_SCALES)
    return OptimizationConfig(ensemble=ensemble, **kwargs)


def drift_hamiltonian(system, coupling_model: str = "isotropic") -> np.ndarray:
    return build_internal_hamiltonian(system, coupling_model)
