"""Liquid-state NMR spin systems: internal Hamiltonians, collective control
operators and the static proton-environment ensemble.

Frequencies and couplings are stored in Hz (offsets from the transmitter)
and converted to rad/s only when a Hamiltonian is assembled.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb
from typing import Sequence

import numpy as np
import yaml

from . import quantum as qc
from .errors import ParseError

TWO_PI = 2 * np.pi

CROTONIC_LABELS = ("A", "B", "C", "D")
CROTONIC_FREQUENCIES_HZ = (-11962.2, 7306.0, 3972.1, 10626.1)
CROTONIC_COUPLINGS_HZ = {
    ("A", "B"): 41.6,
    ("A", "C"): 1.5,
    ("A", "D"): 7.1,
    ("B", "C"): 69.6,
    ("B", "D"): 1.2,
    ("C", "D"): 72.3,
}

COUPLING_MODELS = ("isotropic", "weak")


@dataclass(frozen=True)
class SpinSystem:
    labels: tuple[str, ...]
    frequencies: tuple[float, ...]
    couplings: np.ndarray = field(compare=False)

    def __post_init__(self):
        j = np.array(self.couplings, dtype=float, copy=True)
        n = len(self.labels)
        if len(self.frequencies) != n or j.shape != (n, n):
            raise ValueError(f"inconsistent sizes: {n} labels, {len(self.frequencies)} "
                             f"frequencies, couplings {j.shape}")
        if len(set(self.labels)) != n:
            raise ValueError(f"duplicate spin labels {self.labels}")
        if not np.allclose(j, j.T, rtol=0, atol=1e-12):
            raise ValueError("coupling matrix must be symmetric")
        if np.any(np.diag(j) != 0):
            raise ValueError("coupling matrix must have a zero diagonal")
        j.setflags(write=False)
        object.__setattr__(self, "couplings", j)
        object.__setattr__(self, "frequencies", tuple(float(v) for v in self.frequencies))
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def n_spins(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def coupling(self, a: str, b: str) -> float:
        return float(self.couplings[self.index(a), self.index(b)])

    def __eq__(self, other):
        if not isinstance(other, SpinSystem):
            return NotImplemented
        return (self.labels == other.labels and self.frequencies == other.frequencies
                and np.array_equal(self.couplings, other.couplings))

    def __hash__(self):
        return hash((self.labels, self.frequencies, self.couplings.tobytes()))

    def with_frequencies(self, frequencies: Sequence[float]) -> "SpinSystem":
        return SpinSystem(self.labels, tuple(frequencies), self.couplings)


def crotonic_default() -> SpinSystem:
    """The four 13C spins of crotonic acid (600 MHz, 300 K)."""
    idx = {l: i for i, l in enumerate(CROTONIC_LABELS)}
    j = np.zeros((4, 4))
    for (a, b), val in CROTONIC_COUPLINGS_HZ.items():
        j[idx[a], idx[b]] = j[idx[b], idx[a]] = val
    return SpinSystem(CROTONIC_LABELS, CROTONIC_FREQUENCIES_HZ, j)


def single_spin(frequency_hz: float = 0.0, label: str = "A") -> SpinSystem:
    return SpinSystem((label,), (frequency_hz,), np.zeros((1, 1)))


@dataclass(frozen=True)
class ControlOperators:
    Ix: np.ndarray
    Iy: np.ndarray
    Iz: np.ndarray


@lru_cache(maxsize=None)
def single_spin_operators(n_spins: int) -> tuple[tuple[np.ndarray, np.ndarray, np.ndarray], ...]:
    ops = []
    for k in range(n_spins):
        ops.append(tuple(qc.embed_operator(p / 2, (k,), n_spins)
                         for p in (qc.SIGMA_X, qc.SIGMA_Y, qc.SIGMA_Z)))
    return tuple(ops)


@lru_cache(maxsize=None)
def control_operators(n_spins: int) -> ControlOperators:
    """Total spin operators summed over all spins."""
    if n_spins < 1:
        raise ValueError("n_spins must be at least 1")
    ops = single_spin_operators(n_spins)
    ix, iy, iz = (sum(o[a] for o in ops) for a in range(3))
    for m in (ix, iy, iz):
        m.setflags(write=False)
    return ControlOperators(ix, iy, iz)


def build_internal_hamiltonian(sys: SpinSystem, coupling_model: str = "isotropic") -> np.ndarray:
    """Chemical-shift plus scalar-coupling Hamiltonian in rad/s."""
    if coupling_model not in COUPLING_MODELS:
        raise ValueError(f"unknown coupling model {coupling_model!r}; "
                         f"expected one of {COUPLING_MODELS}")
    n = sys.n_spins
    ops = single_spin_operators(n)
    h = np.zeros((2**n, 2**n), dtype=complex)
    for k in range(n):
        h += TWO_PI * sys.frequencies[k] * ops[k][2]
    for k, l in itertools.combinations(range(n), 2):
        jkl = sys.couplings[k, l]
        if jkl == 0:
            continue
        if coupling_model == "weak":
            h += TWO_PI * jkl * (ops[k][2] @ ops[l][2])
        else:
            h += TWO_PI * jkl * sum(ops[k][a] @ ops[l][a] for a in range(3))
    return h


# --- proton environment -------------------------------------------------

@dataclass(frozen=True)
class EnsembleMember:
    system: SpinSystem
    weight: int
    proton_state: tuple[float, ...]  # representative m_p = +-1/2 per proton


@dataclass(frozen=True)
class EnvironmentEnsemble:
    members: tuple[EnsembleMember, ...]

    @property
    def total_weight(self) -> int:
        return sum(m.weight for m in self.members)

    def __len__(self):
        return len(self.members)

    def hamiltonians(self, coupling_model: str = "isotropic") -> list[np.ndarray]:
        return [build_internal_hamiltonian(m.system, coupling_model) for m in self.members]

    @classmethod
    def trivial(cls, sys: SpinSystem) -> "EnvironmentEnsemble":
        return cls((EnsembleMember(sys, 1, ()),))

    def collapsed(self) -> "EnvironmentEnsemble":
        """Merge members with identical spin systems, summing their weights.

        Weighted averages over the ensemble are unchanged; the first
        member's proton state stands in for each merged group.
        """
        merged: dict[SpinSystem, EnsembleMember] = {}
        for m in self.members:
            if m.system in merged:
                prev = merged[m.system]
                merged[m.system] = EnsembleMember(m.system, prev.weight + m.weight,
                                                  prev.proton_state)
            else:
                merged[m.system] = m
        return EnvironmentEnsemble(tuple(merged.values()))


def environment_ensemble(sys: SpinSystem, hc_couplings, methyl_group=()) -> EnvironmentEnsemble:
    """Effective carbon systems for every distinct static proton configuration.

    Each proton in z-eigenstate m_p = +-1/2 shifts carbon c by m_p * J_pc.
    Configurations of the equivalent methyl protons are merged by their
    number of spin-down members, with binomial multiplicities.
    """
    j = np.asarray(hc_couplings, dtype=float)
    if j.ndim != 2 or j.shape[1] != sys.n_spins:
        raise ValueError(f"hc_couplings must have shape (n_protons, {sys.n_spins}), got {j.shape}")
    n_protons = j.shape[0]
    methyl = sorted(set(int(i) for i in methyl_group))
    if methyl and (methyl[0] < 0 or methyl[-1] >= n_protons):
        raise ValueError(f"methyl indices {methyl} out of range for {n_protons} protons")
    if methyl and not np.allclose(j[methyl], j[methyl[0]], rtol=0, atol=1e-12):
        raise ValueError("methyl protons must couple identically to every carbon")
    others = [p for p in range(n_protons) if p not in methyl]
    base = np.array(sys.frequencies)
    members = []
    for other_state in itertools.product((0.5, -0.5), repeat=len(others)):
        for n_down in range(len(methyl) + 1):
            m = np.zeros(n_protons)
            m[others] = other_state
            if methyl:
                m[methyl] = 0.5
                m[methyl[:n_down]] = -0.5
            shifted = base + m @ j
            members.append(EnsembleMember(sys.with_frequencies(shifted),
                                          comb(len(methyl), n_down), tuple(m)))
    return EnvironmentEnsemble(tuple(members))


# --- config files -------------------------------------------------------

@dataclass(frozen=True)
class SpinConfig:
    system: SpinSystem
    hc_couplings: np.ndarray | None = None
    methyl_group: tuple[int, ...] = ()
    proton_labels: tuple[str, ...] = ()

    def ensemble(self) -> EnvironmentEnsemble:
        if self.hc_couplings is None:
            return EnvironmentEnsemble.trivial(self.system)
        return environment_ensemble(self.system, self.hc_couplings, self.methyl_group)


_TOP_KEYS = {"spins", "couplings", "protons"}
_SPIN_KEYS = {"label", "frequency_hz"}
_PROTON_KEYS = {"label", "couplings_hz", "methyl"}


def _where(node) -> str:
    return f"line {node.start_mark.line + 1}"


def _fail(node, msg):
    raise ParseError(f"{_where(node)}: {msg}")


def _mapping(node, what):
    if not isinstance(node, yaml.MappingNode):
        _fail(node, f"{what} must be a mapping")
    out = {}
    for k, v in node.value:
        if not isinstance(k, yaml.ScalarNode):
            _fail(k, f"{what} keys must be scalars")
        if k.value in out:
            _fail(k, f"duplicate key {k.value!r} in {what}")
        out[k.value] = (k, v)
    return out


def _sequence(node, what):
    if not isinstance(node, yaml.SequenceNode):
        _fail(node, f"{what} must be a list")
    return node.value


def _number(node, what) -> float:
    if not isinstance(node, yaml.ScalarNode):
        _fail(node, f"{what} must be a number")
    try:
        val = float(node.value)
    except ValueError:
        _fail(node, f"{what} must be a number, got {node.value!r}")
    if not np.isfinite(val):
        _fail(node, f"{what} must be finite")
    return val


def _check_keys(items, allowed, what):
    for key, (knode, _) in items.items():
        if key not in allowed:
            _fail(knode, f"unknown key {key!r} in {what}; allowed: {sorted(allowed)}")


def parse_spin_config(text: str) -> SpinConfig:
    """Parse a YAML spin-system document; omitted sections fall back to crotonic acid.

    Raises ParseError with the offending line on any schema violation.
    """
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"malformed YAML: {exc}") from exc
    if root is None or (isinstance(root, yaml.ScalarNode) and root.value == ""):
        return SpinConfig(crotonic_default())
    top = _mapping(root, "document")
    _check_keys(top, _TOP_KEYS, "document")

    if "spins" in top:
        labels, freqs = [], []
        for item in _sequence(top["spins"][1], "spins"):
            fields = _mapping(item, "spin entry")
            _check_keys(fields, _SPIN_KEYS, "spin entry")
            for req in _SPIN_KEYS:
                if req not in fields:
                    _fail(item, f"spin entry missing {req!r}")
            label = fields["label"][1].value
            if label in labels:
                _fail(fields["label"][1], f"duplicate spin label {label!r}")
            labels.append(str(label))
            freqs.append(_number(fields["frequency_hz"][1], "frequency_hz"))
        if not labels:
            _fail(top["spins"][1], "spins list is empty")
        j = np.zeros((len(labels), len(labels)))
    else:
        default = crotonic_default()
        labels, freqs = list(default.labels), list(default.frequencies)
        j = np.array(default.couplings)

    if "couplings" in top:
        seen: dict[tuple[int, int], tuple[float, object]] = {}
        for a, (anode, row) in _mapping(top["couplings"][1], "couplings").items():
            if a not in labels:
                _fail(anode, f"unknown spin {a!r} in couplings")
            for b, (bnode, vnode) in _mapping(row, f"couplings[{a}]").items():
                if b not in labels:
                    _fail(bnode, f"unknown spin {b!r} in couplings[{a}]")
                if a == b:
                    _fail(bnode, f"self-coupling couplings[{a}][{b}] is not allowed")
                val = _number(vnode, f"couplings[{a}][{b}]")
                i, k = labels.index(a), labels.index(b)
                key = (min(i, k), max(i, k))
                if key in seen and seen[key][0] != val:
                    _fail(vnode, f"asymmetric couplings: couplings[{a}][{b}]={val} but "
                                 f"the reverse entry is {seen[key][0]} ({_where(seen[key][1])})")
                seen[key] = (val, vnode)
                j[i, k] = j[k, i] = val

    system = SpinSystem(tuple(labels), tuple(freqs), j)

    if "protons" not in top:
        return SpinConfig(system)
    rows, methyl, plabels = [], [], []
    for p, item in enumerate(_sequence(top["protons"][1], "protons")):
        fields = _mapping(item, "proton entry")
        _check_keys(fields, _PROTON_KEYS, "proton entry")
        if "label" not in fields:
            _fail(item, "proton entry missing 'label'")
        plabels.append(str(fields["label"][1].value))
        row = np.zeros(len(labels))
        if "couplings_hz" in fields:
            for c, (cnode, vnode) in _mapping(fields["couplings_hz"][1], "couplings_hz").items():
                if c not in labels:
                    _fail(cnode, f"unknown spin {c!r} in proton couplings")
                row[labels.index(c)] = _number(vnode, f"couplings_hz[{c}]")
        if "methyl" in fields:
            flag = fields["methyl"][1]
            if not isinstance(flag, yaml.ScalarNode) or flag.value.lower() not in ("true", "false"):
                _fail(flag, "methyl must be true or false")
            if flag.value.lower() == "true":
                methyl.append(p)
        rows.append(row)
    hc = np.array(rows).reshape(len(rows), len(labels))
    cfg = SpinConfig(system, hc, tuple(methyl), tuple(plabels))
    try:
        cfg.ensemble()
    except ValueError as exc:
        _fail(top["protons"][1], str(exc))
    return cfg


def load_spin_config(path) -> SpinConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read spin config {path}: {exc}") from exc
    try:
        return parse_spin_config(text)
    except ParseError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def dump_spin_config(cfg: SpinConfig) -> str:
    sys = cfg.system
    doc: dict = {
        "spins": [{"label": l, "frequency_hz": f} for l, f in zip(sys.labels, sys.frequencies)],
        "couplings": {},
    }
    for i, k in itertools.combinations(range(sys.n_spins), 2):
        if sys.couplings[i, k] != 0:
            doc["couplings"].setdefault(sys.labels[i], {})[sys.labels[k]] = float(sys.couplings[i, k])
    if cfg.hc_couplings is not None:
        doc["protons"] = []
        for p, row in enumerate(cfg.hc_couplings):
            entry = {"label": cfg.proton_labels[p] if cfg.proton_labels else f"H{p + 1}",
                     "couplings_hz": {l: float(v) for l, v in zip(sys.labels, row) if v != 0}}
            if p in cfg.methyl_group:
                entry["methyl"] = True
            doc["protons"].append(entry)
    return yaml.safe_dump(doc, sort_keys=False)
