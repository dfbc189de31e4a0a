#!/usr/bin/env python3
"""Achievable-fidelity oracle: optimise one gate from several random seeds
and report the per-seed and best fidelities."""
import argparse
import json
import time

from qhomog.design import DesignSettings, best_of_seeds
from qhomog.pulsefile import write_pulse
from qhomog.spins import SpinConfig, crotonic_default, load_spin_config


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gate", default="swap_BC")
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--segments", type=int, default=None,
                    help="default: sized from the gate's weakest coupling")
    ap.add_argument("--threshold", type=float, default=0.99)
    ap.add_argument("--max-iter", type=int, default=2000)
    ap.add_argument("--spin-config")
    ap.add_argument("--ensemble", action="store_true")
    ap.add_argument("--threads", type=int, default=3)
    ap.add_argument("--out", help="write the best pulse here")
    args = ap.parse_args()

    cfg = load_spin_config(args.spin_config) if args.spin_config else SpinConfig(crotonic_default())
    settings = DesignSettings(n_segments=args.segments, target_fidelity=args.threshold,
                              max_iterations=args.max_iter, use_ensemble=args.ensemble,
                              threads=args.threads)
    t0 = time.perf_counter()
    pf, rep, fids = best_of_seeds(args.gate, cfg, settings, range(args.seeds))
    summary = {"gate": args.gate, "per_seed": fids, "best": max(fids),
               "seconds": round(time.perf_counter() - t0, 1)}
    print(json.dumps(summary, indent=2))
    if args.out:
        write_pulse(args.out, pf)


if __name__ == "__main__":
    main()
