#!/usr/bin/env python3
"""Homogenisation of one system qubit against n fresh reservoir qubits.

Compares the full density-matrix simulation with the marginal map and
tabulates how much the reservoir qubits are disturbed as eta shrinks.
"""
import argparse

import numpy as np

from qhomog import homogeniser as hg
from qhomog import quantum as qc


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--fs", type=float, default=1.0)
    ap.add_argument("--fr", type=float, default=0.0)
    ap.add_argument("--n-full", type=int, default=9, help="reservoir size for full-state runs")
    ap.add_argument("--n-map", type=int, default=100, help="reservoir size for the map")
    args = ap.parse_args()

    print("full state vs marginal map")
    print(f"{'eta':>5} {'n':>3} {'f_s(n) full':>14} {'max |full-map|':>15}")
    for deg in (5, 10, 20, 45):
        eta = np.radians(deg)
        full = hg.homogenize_chain(qc.state_from_f(args.fs), args.fr, args.n_full, eta)
        ref = hg.marginal_map_trace(args.fs, args.fr, eta, args.n_full)
        err = np.max(np.abs(np.array(full.system_f) - ref.system_f))
        print(f"{deg:5d} {args.n_full:3d} {full.system_f[-1]:14.10f} {err:15.2e}")

    print(f"\nmarginal map, n = {args.n_map}")
    for deg in (1, 5, 10, 20):
        f = hg.marginal_map_iterate(args.fs, args.fr, np.radians(deg), args.n_map)[-1]
        print(f"  eta {deg:3d} deg: |f_s - f_r| = {abs(f - args.fr):.6f}")

    print("\nreservoir disturbance (n = 5): max final trace distance")
    for deg in range(10, 0, -1):
        tr = hg.homogenize_chain(qc.state_from_f(args.fs), args.fr, 5, np.radians(deg))
        print(f"  eta {deg:3d} deg: {max(tr.reservoir_distances):.3e}")


if __name__ == "__main__":
    main()
