"""Built-in target gates, addressed by name.

Names:
    identity
    partial_swap_<deg>[_<P><Q>]   partial swap; default pair is the chain middle (B, C)
    swap_<P><Q>[_<R><S>]          one or two simultaneous SWAPs
    x180[_<P>]                    pi rotation about x on all spins or on spin P
    x90[_<P>]                     pi/2 rotation about x
"""
from __future__ import annotations

import re

import numpy as np

from . import quantum as qc
from .homogeniser import partial_swap_unitary


def _rx(angle: float) -> np.ndarray:
    return np.cos(angle / 2) * qc.I2 - 1j * np.sin(angle / 2) * qc.SIGMA_X


def _index(labels, name, label):
    if label not in labels:
        raise ValueError(f"gate {name!r}: unknown spin {label!r} (spins are {list(labels)})")
    return labels.index(label)


def _pairs(labels, name, text):
    # "BC" -> (1, 2); labels are single characters for pair syntax
    if len(text) != 2:
        raise ValueError(f"gate {name!r}: pair {text!r} must name two single-letter spins")
    return (_index(labels, name, text[0]), _index(labels, name, text[1]))


def target_unitary(name: str, labels) -> np.ndarray:
    labels = tuple(labels)
    n = len(labels)
    if name == "identity":
        return np.eye(2**n, dtype=complex)
    m = re.fullmatch(r"partial_swap_(-?\d+(?:\.\d+)?)(?:_([A-Za-z]{2}))?", name)
    if m:
        if m.group(2):
            pair = _pairs(labels, name, m.group(2))
        else:
            if n < 2:
                raise ValueError(f"gate {name!r} needs at least two spins")
            pair = (n // 2 - 1, n // 2)
        return qc.embed_operator(partial_swap_unitary(np.radians(float(m.group(1)))), pair, n)
    m = re.fullmatch(r"swap_([A-Za-z]{2})(?:_([A-Za-z]{2}))?", name)
    if m:
        u = np.eye(2**n, dtype=complex)
        used = set()
        for grp in m.groups():
            if grp:
                pair = _pairs(labels, name, grp)
                if used & set(pair):
                    raise ValueError(f"gate {name!r}: overlapping swap pairs")
                used |= set(pair)
                u = qc.embed_operator(qc.SWAP, pair, n) @ u
        return u
    m = re.fullmatch(r"x(180|90)(?:_(\w+))?", name)
    if m:
        r = _rx(np.radians(float(m.group(1))))
        if m.group(2):
            return qc.embed_operator(r, (_index(labels, name, m.group(2)),), n)
        return qc.kron_all([r] * n)
    raise ValueError(f"unknown gate {name!r}")


def gate_pairs(name: str, labels) -> list[tuple[int, int]]:
    """Spin pairs whose coupling a two-spin gate relies on (empty for local gates)."""
    labels = tuple(labels)
    target_unitary(name, labels)  # validates the name
    m = re.fullmatch(r"partial_swap_[-\d.]+(?:_([A-Za-z]{2}))?", name)
    if m:
        if m.group(1):
            return [_pairs(labels, name, m.group(1))]
        n = len(labels)
        return [(n // 2 - 1, n // 2)]
    m = re.fullmatch(r"swap_([A-Za-z]{2})(?:_([A-Za-z]{2}))?", name)
    if m:
        return [_pairs(labels, name, g) for g in m.groups() if g]
    return []


def circuit_gate_names(schedule, eta_deg: float, labels=("A", "B", "C", "D")) -> list[str]:
    """Gate names for one pass through ``schedule``; each step is one pulse."""
    names = []
    for step in schedule.steps:
        if step.kind == "partial_swap":
            i, j = step.pairs[0]
            names.append(f"partial_swap_{_deg_token(eta_deg)}_{labels[i]}{labels[j]}")
        else:
            names.append("swap_" + "_".join(labels[i] + labels[j] for i, j in step.pairs))
    return names


def _deg_token(eta_deg: float) -> str:
    return str(int(eta_deg)) if float(eta_deg).is_integer() else repr(float(eta_deg))
