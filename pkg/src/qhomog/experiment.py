"""End-to-end eta sweeps over the four-qubit homogeniser, readout
normalisation and record serialisation.
"""
from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import quantum as qc
from .errors import ConfigurationError, NormalisationError, ParseError
from .gates import circuit_gate_names, target_unitary
from .grape import PulseSpec, pulse_propagator
from .homogeniser import (LABELS, InteractionSchedule, MarginalSet, closed_form_marginals,
                          initial_state, marginals_of, standard_schedule)
from .pulsefile import read_pulse
from .spins import EnvironmentEnsemble, crotonic_default

MODES = ("ideal_gates", "grape_pulses")
SCHEMES = ("none", "scheme_A", "scheme_B")


@dataclass(frozen=True)
class SweepRecord:
    eta_deg: float
    f_raw: MarginalSet
    f_normalised: MarginalSet
    normalisation: str = "none"
    mode: str = "ideal_gates"
    repeat_index: int = 0

    @property
    def eta(self) -> float:
        return float(np.radians(self.eta_deg))


# --- circuits -------------------------------------------------------------

@dataclass
class PulsedGate:
    """One circuit gate realised either by a pulse or by a fixed unitary."""

    name: str
    pulse: PulseSpec | None = None
    unitary: np.ndarray | None = None
    spin_system: str = "crotonic"

    def __post_init__(self):
        if (self.pulse is None) == (self.unitary is None):
            raise ValueError(f"gate {self.name!r} needs exactly one of pulse or unitary")

    def propagator(self, h0: np.ndarray) -> np.ndarray:
        if self.unitary is not None:
            return self.unitary
        return qc.nearest_unitary(pulse_propagator(h0, self.pulse))


@dataclass
class PulsedCircuit:
    """Gate sequences per eta, isomorphic to an interaction schedule."""

    schedule: InteractionSchedule
    gates: dict[float, list[PulsedGate]]

    def for_eta(self, eta_deg: float) -> list[PulsedGate]:
        if eta_deg not in self.gates:
            raise ConfigurationError(f"no pulsed circuit for eta={eta_deg} deg")
        return self.gates[eta_deg]


def _gate_names(schedule, eta_deg):
    # eta = 0 is the identity, realised by leaving the partial swap out
    names = circuit_gate_names(schedule, eta_deg, schedule.labels)
    if eta_deg == 0:
        names = [n for n in names if not n.startswith("partial_swap_")]
    return names


def ideal_pulsed_circuit(eta_grid_deg: Iterable[float],
                         schedule: InteractionSchedule | None = None) -> PulsedCircuit:
    """Ideal unitaries wrapped as gates; a grape-mode run with this circuit
    reproduces the ideal sweep."""
    schedule = schedule or standard_schedule()
    gates = {}
    for deg in eta_grid_deg:
        gates[float(deg)] = [PulsedGate(n, unitary=target_unitary(n, schedule.labels))
                             for n in _gate_names(schedule, deg)]
    return PulsedCircuit(schedule, gates)


def load_pulsed_circuit(pulse_dir, eta_grid_deg: Iterable[float],
                        schedule: InteractionSchedule | None = None) -> PulsedCircuit:
    """Read ``<gate name>.pulse`` files from ``pulse_dir`` for every eta."""
    schedule = schedule or standard_schedule()
    pulse_dir = Path(pulse_dir)
    cache: dict[str, PulsedGate] = {}
    gates = {}
    for deg in eta_grid_deg:
        seq = []
        for name in _gate_names(schedule, deg):
            if name not in cache:
                path = pulse_dir / f"{name}.pulse"
                if not path.is_file():
                    raise ConfigurationError(
                        f"missing pulse file for gate {name!r} at eta={deg} deg: {path}")
                try:
                    pf = read_pulse(path)
                except ParseError as exc:
                    raise ConfigurationError(f"gate {name!r} at eta={deg} deg: {exc}") from exc
                cache[name] = PulsedGate(name, pulse=pf.pulse, spin_system=pf.spin_system)
            seq.append(cache[name])
        gates[float(deg)] = seq
    return PulsedCircuit(schedule, gates)


# --- sweeps ---------------------------------------------------------------

def _ideal_point(eta_deg: float, schedule: InteractionSchedule) -> MarginalSet:
    gates = ideal_pulsed_circuit([eta_deg], schedule).for_eta(float(eta_deg))
    rho = initial_state()
    for gate in gates:
        rho = qc.apply_unitary(gate.unitary, rho)
    return marginals_of(rho)


def _pulsed_point(gates: Sequence[PulsedGate], hamiltonians, weights) -> MarginalSet:
    rho0 = initial_state()
    acc = np.zeros_like(rho0)
    for h0, w in zip(hamiltonians, weights):
        rho = rho0
        for gate in gates:
            rho = qc.apply_unitary(gate.propagator(h0), rho)
        acc += w * rho
    return marginals_of(acc / sum(weights))


def run_sweep(mode: str, eta_grid_deg: Sequence[float], repeats: int = 1, *,
              circuit: PulsedCircuit | None = None,
              ensemble: EnvironmentEnsemble | None = None,
              coupling_model: str = "isotropic",
              schedule: InteractionSchedule | None = None,
              threads: int | None = None) -> list[SweepRecord]:
    """Simulate the circuit at every eta; raw polarisations, no normalisation.

    In ``grape_pulses`` mode each gate's pulse is propagated under every
    environment-ensemble Hamiltonian and the final states are averaged with
    the multiplicity weights. The simulation is deterministic, so repeats
    are identical copies.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    schedule = schedule or (circuit.schedule if circuit else standard_schedule())
    grid = [float(d) for d in eta_grid_deg]

    if mode == "ideal_gates":
        def point(deg):
            return _ideal_point(deg, schedule)
    else:
        if circuit is None:
            raise ConfigurationError("grape_pulses mode needs a pulsed circuit")
        for deg in grid:
            circuit.for_eta(deg)
        ensemble = (ensemble or EnvironmentEnsemble.trivial(crotonic_default())).collapsed()
        hams = ensemble.hamiltonians(coupling_model)
        weights = [m.weight for m in ensemble.members]

        def point(deg):
            return _pulsed_point(circuit.for_eta(deg), hams, weights)

    if threads is not None and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(point, grid))
    else:
        results = [point(d) for d in grid]
    records = [SweepRecord(deg, f, f, "none", mode, r)
               for deg, f in zip(grid, results) for r in range(repeats)]
    return sorted(records, key=lambda rec: (rec.eta_deg, rec.repeat_index))


# --- normalisation --------------------------------------------------------

def _reference(records, eta_deg, repeat):
    for rec in records:
        if rec.eta_deg == eta_deg and rec.repeat_index == repeat:
            return rec.f_raw
    raise NormalisationError(f"no eta={eta_deg} deg reference record for repeat {repeat}")


def normalise_scheme_A(records: Sequence[SweepRecord]) -> list[SweepRecord]:
    """Divide every spin by the mean A/B intensity of the eta = 0 record."""
    out = []
    for rec in records:
        ref = _reference(records, 0.0, rec.repeat_index)
        scale = 0.5 * (ref.f_A + ref.f_B)
        if scale == 0:
            raise NormalisationError(f"zero A/B reference intensity in repeat {rec.repeat_index}")
        norm = MarginalSet.from_sequence(np.array(rec.f_raw.as_tuple()) / scale)
        out.append(replace(rec, f_normalised=norm, normalisation="scheme_A"))
    return out


def normalise_scheme_B(records: Sequence[SweepRecord]) -> list[SweepRecord]:
    """Per-spin references: A, B from eta = 0; C, D from eta = 90."""
    out = []
    for rec in records:
        r0 = _reference(records, 0.0, rec.repeat_index)
        r90 = _reference(records, 90.0, rec.repeat_index)
        refs = (r0.f_A, r0.f_B, r90.f_C, r90.f_D)
        for label, r in zip(LABELS, refs):
            if r == 0:
                raise NormalisationError(f"zero reference for spin {label} in repeat "
                                         f"{rec.repeat_index}")
        norm = MarginalSet.from_sequence(f / r for f, r in zip(rec.f_raw.as_tuple(), refs))
        out.append(replace(rec, f_normalised=norm, normalisation="scheme_B"))
    return out


def normalise(records, scheme: str) -> list[SweepRecord]:
    if scheme == "none":
        return [replace(r, f_normalised=r.f_raw, normalisation="none") for r in records]
    if scheme == "scheme_A":
        return normalise_scheme_A(records)
    if scheme == "scheme_B":
        return normalise_scheme_B(records)
    raise ValueError(f"unknown normalisation scheme {scheme!r}")


# --- serialisation --------------------------------------------------------

def _entropy(f):
    # normalised data may sit slightly outside the Bloch sphere
    return qc.von_neumann_entropy(min(1.0, max(-1.0, f)))


COLUMNS = (
    ["eta_deg", "repeat"]
    + [f"f{l}_raw" for l in LABELS]
    + [f"f{l}_norm" for l in LABELS]
    + [f"theory_f{l}" for l in LABELS]
    + [f"S_{l}" for l in LABELS]
    + ["S_sum", "theory_S_sum", "mode", "scheme"]
)

_DELIMITERS = {"csv": ",", "tsv": "\t"}


def _row(rec: SweepRecord) -> list[str]:
    theory = closed_form_marginals(rec.eta).as_tuple()
    ent = [_entropy(f) for f in rec.f_normalised.as_tuple()]
    th_ent = sum(_entropy(f) for f in theory)
    nums = ([rec.eta_deg] + list(rec.f_raw.as_tuple()) + list(rec.f_normalised.as_tuple())
            + list(theory) + ent + [sum(ent), th_ent])
    cells = [repr(float(x)) for x in nums]
    return [cells[0], str(rec.repeat_index)] + cells[1:] + [rec.mode, rec.normalisation]


def format_records(records: Sequence[SweepRecord], fmt: str = "csv") -> str:
    if not records:
        raise ValueError("no records to emit")
    if fmt not in _DELIMITERS:
        raise ValueError(f"unknown format {fmt!r}; expected one of {sorted(_DELIMITERS)}")
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter=_DELIMITERS[fmt], lineterminator="\n")
    writer.writerow(COLUMNS)
    for rec in sorted(records, key=lambda r: (r.eta_deg, r.repeat_index)):
        writer.writerow(_row(rec))
    return buf.getvalue()


def emit_records(records: Sequence[SweepRecord], path=None, fmt: str = "csv") -> str:
    """Serialise records; write to ``path`` when given. Returns the text."""
    text = format_records(records, fmt)
    if path is not None:
        try:
            Path(path).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot write records to {path}: {exc}") from exc
    return text


def parse_records(text: str, fmt: str = "csv") -> list[SweepRecord]:
    reader = csv.DictReader(io.StringIO(text), delimiter=_DELIMITERS[fmt])
    if reader.fieldnames is None or list(reader.fieldnames) != COLUMNS:
        raise ParseError(f"unexpected header {reader.fieldnames}")
    out = []
    for row in reader:
        raw = MarginalSet.from_sequence(float(row[f"f{l}_raw"]) for l in LABELS)
        norm = MarginalSet.from_sequence(float(row[f"f{l}_norm"]) for l in LABELS)
        out.append(SweepRecord(float(row["eta_deg"]), raw, norm, row["scheme"], row["mode"],
                               int(row["repeat"])))
    return out


def read_records(path, fmt: str = "csv") -> list[SweepRecord]:
    return parse_records(Path(path).read_text(encoding="utf-8"), fmt)
