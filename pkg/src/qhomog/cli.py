"""Command-line entry point.

Exit codes: 0 success, 1 numeric failure (threshold unmet), 2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import experiment as ex
from . import homogeniser as hg
from . import quantum as qc
from .design import DesignSettings, design_gate, gradient_check
from .errors import HomogeniserError
from .grape import DEFAULT_AMPLITUDE, DEFAULT_DT
from .pulsefile import write_pulse
from .spins import (SpinConfig, build_internal_hamiltonian, crotonic_default, load_spin_config,
                    single_spin)

EXIT_OK, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 2


class ConfigError(Exception):
    pass


def parse_grid(spec: str) -> list[float]:
    """``start:stop:step`` in degrees, stop inclusive."""
    try:
        start, stop, step = (float(x) for x in spec.split(":"))
    except ValueError:
        raise ConfigError(f"bad grid {spec!r}; expected start:stop:step in degrees") from None
    if step <= 0 or stop < start:
        raise ConfigError(f"bad grid {spec!r}; need step > 0 and stop >= start")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [start + i * step for i in range(count)]


def _check_out(path):
    if path is None:
        return None
    path = Path(path)
    if not path.parent.exists() and str(path.parent) not in ("", "."):
        raise ConfigError(f"output directory {path.parent} does not exist")
    return path


def _spin_config(args) -> SpinConfig:
    if args.spin_config is None:
        return SpinConfig(crotonic_default())
    if not Path(args.spin_config).is_file():
        raise ConfigError(f"spin config {args.spin_config} not found")
    return load_spin_config(args.spin_config)


def _emit(text: str, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _threads(args):
    return args.threads if args.threads else (os.cpu_count() or 1)


def _table(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


# --- subcommands ------------------------------------------------------------

def cmd_sweep(args) -> int:
    grid = parse_grid(args.grid)
    out = _check_out(args.out)
    scheme = {"none": "none", "A": "scheme_A", "B": "scheme_B"}[args.scheme]
    if scheme == "scheme_A" and 0.0 not in grid:
        raise ConfigError("scheme A needs eta = 0 in the grid")
    if scheme == "scheme_B" and not (0.0 in grid and 90.0 in grid):
        raise ConfigError("scheme B needs eta = 0 and eta = 90 in the grid")
    if args.mode == "ideal":
        records = ex.run_sweep("ideal_gates", grid, args.repeats, threads=_threads(args))
    else:
        if args.pulse_dir is None:
            raise ConfigError("--pulse-dir is required in grape mode")
        if not Path(args.pulse_dir).is_dir():
            raise ConfigError(f"pulse directory {args.pulse_dir} not found")
        cfg = _spin_config(args)
        circuit = ex.load_pulsed_circuit(args.pulse_dir, grid)
        ensemble = cfg.ensemble() if args.ensemble else SpinConfig(cfg.system).ensemble()
        records = ex.run_sweep("grape_pulses", grid, args.repeats, circuit=circuit,
                               ensemble=ensemble, coupling_model=args.coupling_model,
                               threads=_threads(args))
    records = ex.normalise(records, scheme)
    _emit(ex.format_records(records, args.format), out)
    return EXIT_OK


def cmd_converge(args) -> int:
    out = _check_out(args.out)
    eta = np.radians(args.eta)
    if args.n < 1:
        raise ConfigError("--n must be at least 1")
    if not (abs(args.fs) <= 1 and abs(args.fr) <= 1):
        raise ConfigError("polarisations must lie in [-1, 1]")
    if args.map:
        trace = hg.marginal_map_trace(args.fs, args.fr, eta, args.n)
    else:
        if args.n + 1 > hg.MAX_CHAIN_QUBITS:
            raise ConfigError(f"full-state mode is capped at {hg.MAX_CHAIN_QUBITS - 1} reservoir "
                              "qubits; use --map for the marginal map")
        trace = hg.homogenize_chain(qc.state_from_f(args.fs), args.fr, args.n, eta)
    rows = [(0, trace.system_f[0], "", "")]
    for k in range(1, args.n + 1):
        rows.append((k, trace.system_f[k], trace.reservoir_final_f[k - 1],
                     trace.reservoir_distances[k - 1]))
    _emit(_table(["step", "f_system", "f_reservoir_final", "reservoir_trace_distance"], rows), out)
    print(f"final f_system = {trace.system_f[-1]!r}; |f_s - f_r| = "
          f"{abs(trace.system_f[-1] - args.fr)!r}", file=sys.stderr)
    return EXIT_OK


def cmd_design(args) -> int:
    out = _check_out(args.out)
    if out is None:
        raise ConfigError("design needs --out for the pulse file")
    cfg = _spin_config(args)
    from .gates import target_unitary
    try:
        target_unitary(args.gate, cfg.system.labels)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rf = tuple(float(x) for x in args.rf_scales.split(","))
    settings = DesignSettings(
        n_segments=args.segments, dt=args.dt, amplitude=args.amplitude, rf_scales=rf,
        target_fidelity=args.threshold, max_iterations=args.max_iter, seed=args.seed,
        method=args.method, coupling_model=args.coupling_model, use_ensemble=args.ensemble,
        threads=_threads(args))
    name = Path(args.spin_config).stem if args.spin_config else "crotonic"
    pf, report = design_gate(args.gate, cfg, settings, spin_system_name=name)
    write_pulse(out, pf)
    summary = {
        "gate": args.gate,
        "fidelity": report.fidelity,
        "min_member_fidelity": report.min_fidelity,
        "member_fidelities": report.member_fidelities,
        "gradient_norm": report.gradient_norm,
        "iterations": report.iterations,
        "converged": report.converged,
        "stop_reason": report.stop_reason,
    }
    Path(str(out) + ".report.json").write_text(json.dumps(summary, indent=2) + "\n")
    status = "converged" if report.converged else "NOT converged"
    print(f"{args.gate}: fidelity {report.fidelity:.10f} after {report.iterations} "
          f"iterations ({status}, {report.stop_reason})")
    return EXIT_OK if report.converged else EXIT_NUMERIC


def _gradcheck_system(name):
    if name == "single":
        return single_spin(250.0)
    if name == "two":
        from .spins import SpinSystem
        return SpinSystem(("A", "B"), (-1500.0, 2200.0), np.array([[0, 45.0], [45.0, 0]]))
    return crotonic_default()


def cmd_gradcheck(args) -> int:
    if args.spin_config:
        system = _spin_config(args).system
    else:
        system = _gradcheck_system(args.system)
    h0 = build_internal_hamiltonian(system, args.coupling_model)
    d = h0.shape[0]
    worst = (0.0, -1, -1)
    for inst in range(args.instances):
        rng = np.random.default_rng(args.seed + 1000 * inst)
        a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        target = qc.expm_skew_hermitian(-1j * (a + a.conj().T) / 2)
        exact, _, rel = gradient_check(h0, args.segments, args.dt, args.amplitude, target,
                                       seed=args.seed + inst, step=args.step)
        j = int(np.argmax(rel))
        print(f"instance {inst}: max|grad| {np.max(np.abs(exact)):.3e}, "
              f"max relative deviation {rel[j]:.3e} at segment {j}")
        if rel[j] > worst[0]:
            worst = (float(rel[j]), inst, j)
    print(f"max relative deviation {worst[0]:.3e}")
    if worst[0] > args.tol:
        print(f"FAIL: deviation {worst[0]:.3e} > {args.tol:g} at instance {worst[1]}, "
              f"segment {worst[2]}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_entropy(args) -> int:
    grid = parse_grid(args.grid)
    out = _check_out(args.out)
    rows = []
    for deg, row in zip(grid, hg.entropy_profile([np.radians(g) for g in grid])):
        rows.append([deg, *row.entropies, row.total, *row.theory_entropies, row.theory_total])
    header = (["eta_deg"] + [f"S_{l}" for l in hg.LABELS] + ["S_sum"]
              + [f"theory_S_{l}" for l in hg.LABELS] + ["theory_S_sum"])
    _emit(_table(header, rows), out)
    return EXIT_OK


# --- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=None,
                        help="cap on worker threads (default: available cores)")
    common.add_argument("--spin-config", help="YAML spin-system file (default: crotonic acid)")
    common.add_argument("--coupling-model", choices=("isotropic", "weak"), default="isotropic")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="qhomog", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sweep", parents=[common], help="eta sweep of the 4-qubit homogeniser")
    s.add_argument("--mode", choices=("ideal", "grape"), default="ideal")
    s.add_argument("--grid", default="0:90:10", help="start:stop:step in degrees")
    s.add_argument("--repeats", type=int, default=1)
    s.add_argument("--scheme", choices=("none", "A", "B"), default="none")
    s.add_argument("--pulse-dir", help="directory of <gate>.pulse files (grape mode)")
    s.add_argument("--ensemble", action="store_true",
                   help="average over the proton-environment ensemble from --spin-config")
    s.add_argument("--format", choices=("csv", "tsv"), default="csv")
    s.set_defaults(func=cmd_sweep)

    c = sub.add_parser("converge", parents=[common], help="system + N reservoir homogenisation")
    c.add_argument("--eta", type=float, required=True, help="coupling angle in degrees")
    c.add_argument("--n", type=int, required=True, help="number of reservoir qubits")
    c.add_argument("--fs", type=float, default=1.0, help="initial system polarisation")
    c.add_argument("--fr", type=float, default=0.0, help="reservoir polarisation")
    mode = c.add_mutually_exclusive_group()
    mode.add_argument("--map", action="store_true", help="marginal map (any n)")
    mode.add_argument("--full", action="store_true", help="full density matrix (default)")
    c.set_defaults(func=cmd_converge)

    d = sub.add_parser("design", parents=[common], help="design a phase-only GRAPE pulse")
    d.add_argument("--gate", required=True)
    d.add_argument("--segments", type=int, default=None,
                   help="pulse segments (default: 2.5 periods of the gate's weakest coupling, "
                        "at least 3000)")
    d.add_argument("--dt", type=float, default=DEFAULT_DT, help="segment duration (s)")
    d.add_argument("--amplitude", type=float, default=DEFAULT_AMPLITUDE, help="RF amplitude (rad/s)")
    d.add_argument("--rf-scales", default="0.95,1.0,1.05")
    d.add_argument("--threshold", type=float, default=0.99)
    d.add_argument("--max-iter", type=int, default=2000)
    d.add_argument("--method", choices=("lbfgs", "gradient"), default="lbfgs")
    d.add_argument("--ensemble", action="store_true",
                   help="robust over the proton-environment ensemble from --spin-config")
    d.set_defaults(func=cmd_design)

    g = sub.add_parser("gradcheck", parents=[common], help="exact vs finite-difference gradients")
    g.add_argument("--system", choices=("single", "two", "crotonic"), default="crotonic")
    g.add_argument("--segments", type=int, default=50)
    g.add_argument("--dt", type=float, default=DEFAULT_DT)
    g.add_argument("--amplitude", type=float, default=DEFAULT_AMPLITUDE)
    g.add_argument("--instances", type=int, default=3)
    g.add_argument("--step", type=float, default=1e-6)
    g.add_argument("--tol", type=float, default=1e-6)
    g.set_defaults(func=cmd_gradcheck)

    e = sub.add_parser("entropy", parents=[common], help="per-qubit entropy profile")
    e.add_argument("--grid", default="0:90:10")
    e.set_defaults(func=cmd_entropy)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, HomogeniserError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
