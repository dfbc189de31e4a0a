"""Plain-text pulse files.

Layout::

    # qhomog pulse
    n_segments: 3000
    dt_s: 1e-05
    amplitude_rad_s: 62831.853071795864
    spin_system: crotonic
    target_gate: swap_BC
    fidelity: 0.9904
    converged: true
    ---
    <one phase in radians per line>

Floats are written with ``repr`` (shortest round-trip form, up to 17
significant digits), so reading a written file reproduces it bit-exactly.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError
from .grape import PulseSpec

MAGIC = "# qhomog pulse"
_REQUIRED = ("n_segments", "dt_s", "amplitude_rad_s", "spin_system", "target_gate")
_OPTIONAL = ("fidelity", "converged")


@dataclass
class PulseFile:
    pulse: PulseSpec
    spin_system: str
    target_gate: str
    fidelity: float | None = None
    converged: bool | None = None


def format_pulse(pf: PulseFile) -> str:
    p = pf.pulse
    lines = [
        MAGIC,
        f"n_segments: {p.n_segments}",
        f"dt_s: {float(p.dt)!r}",
        f"amplitude_rad_s: {float(p.amplitude)!r}",
        f"spin_system: {pf.spin_system}",
        f"target_gate: {pf.target_gate}",
    ]
    if pf.fidelity is not None:
        lines.append(f"fidelity: {float(pf.fidelity)!r}")
    if pf.converged is not None:
        lines.append(f"converged: {'true' if pf.converged else 'false'}")
    lines.append("---")
    lines.extend(repr(float(v)) for v in p.phases)
    return "\n".join(lines) + "\n"


def parse_pulse(text: str, source: str = "<string>") -> PulseFile:
    lines = text.splitlines()
    if not lines or lines[0].strip() != MAGIC:
        raise ParseError(f"{source}: line 1: expected header {MAGIC!r}")
    header: dict[str, str] = {}
    body_start = None
    for no, line in enumerate(lines[1:], start=2):
        if line.strip() == "---":
            body_start = no
            break
        key, sep, value = line.partition(":")
        key = key.strip()
        if not sep or key not in _REQUIRED + _OPTIONAL:
            raise ParseError(f"{source}: line {no}: unrecognised header line {line!r}")
        if key in header:
            raise ParseError(f"{source}: line {no}: duplicate header key {key!r}")
        header[key] = value.strip()
    if body_start is None:
        raise ParseError(f"{source}: missing '---' separator before phases")
    for key in _REQUIRED:
        if key not in header:
            raise ParseError(f"{source}: missing header key {key!r}")
    try:
        n = int(header["n_segments"])
        dt = float(header["dt_s"])
        amp = float(header["amplitude_rad_s"])
        fid = float(header["fidelity"]) if "fidelity" in header else None
    except ValueError as exc:
        raise ParseError(f"{source}: bad numeric header value: {exc}") from exc
    conv = None
    if "converged" in header:
        if header["converged"] not in ("true", "false"):
            raise ParseError(f"{source}: converged must be true or false")
        conv = header["converged"] == "true"
    phases = []
    for no, line in enumerate(lines[body_start:], start=body_start + 1):
        if not line.strip():
            continue
        try:
            phases.append(float(line))
        except ValueError:
            raise ParseError(f"{source}: line {no}: bad phase value {line!r}") from None
    if len(phases) != n:
        raise ParseError(f"{source}: header declares {n} segments but {len(phases)} phases follow")
    try:
        pulse = PulseSpec(n, dt, amp, np.array(phases))
    except ValueError as exc:
        raise ParseError(f"{source}: {exc}") from exc
    return PulseFile(pulse, header["spin_system"], header["target_gate"], fid, conv)


def write_pulse(path, pf: PulseFile) -> None:
    Path(path).write_text(format_pulse(pf), encoding="utf-8")


def read_pulse(path) -> PulseFile:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read pulse file {path}: {exc}") from exc
    return parse_pulse(text, str(path))
