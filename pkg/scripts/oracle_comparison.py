#!/usr/bin/env python3
"""Closed-form joint state against the Lindblad integrator for several scenarios.

Prints, per parameter set and initial state, the worst element deviation over the
time grid and the wall time of each side.

    python scripts/oracle_comparison.py --dt 1e-3 --cutoff 12
"""

import argparse
import time

import numpy as np

from bosrec import density as dm
from bosrec.lindblad import simulate
from bosrec.model import Coherent, ModelParams, Thermal, fock_state, joint_density

PARAMS = {
    "resonant": ModelParams(5.0, 5.0, 0.05, 0.08, 0.1),
    "detuned": ModelParams(3.0, 3.4, 0.2, 0.05, 0.3),
    "overdamped": ModelParams(1.0, 2.0, 0.4, 0.4, 0.1),
}
INITIALS = {
    "fock1": fock_state(1),
    "fock2": fock_state(2),
    "coherent0.6": Coherent(0.6),
    "thermal2": Thermal(2.0),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--cutoff", type=int, default=12)
    ap.add_argument("--t-end", type=float, default=30.0)
    ap.add_argument("--step", type=float, default=0.5)
    args = ap.parse_args()

    c = args.cutoff
    grid = np.arange(0, args.t_end + 1e-9, args.step)
    print(f"{'params':<11} {'initial':<12} {'max dev':>10} {'oracle s':>9} {'closed s':>9}")
    for pname, p in PARAMS.items():
        for iname, init in INITIALS.items():
            t0 = time.perf_counter()
            traj = simulate(p, init.matrix(c), (c, c), grid, args.dt)
            t1 = time.perf_counter()
            ours = [joint_density(p, init, c, c, t) for t in grid]
            t2 = time.perf_counter()
            dev = max(dm.max_deviation(a, b) for a, b in zip(ours, traj.states))
            print(f"{pname:<11} {iname:<12} {dev:10.2e} {t1 - t0:9.2f} {t2 - t1:9.2f}")


if __name__ == "__main__":
    main()
