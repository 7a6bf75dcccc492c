#!/usr/bin/env python3
"""State transfer between two lossless resonant modes.

For a Fock, a coherent and a thermal initial state, evaluates both reduced states
at t = pi/(2g) and prints the fidelity of mode 2 with the phase-rotated initial
state. With --trace, also prints the populations of both modes over one swap.
"""

import argparse
import math

import numpy as np

from bosrec.model import ModelParams, reduced_density
from bosrec.scenario import build_initial, load_config, run_swap_demo

INITIALS = {
    "fock |3>": "initial.kind = fock\ninitial.n = 3",
    "coherent 0.8+0.3i": "initial.kind = coherent\ninitial.alpha = 0.8+0.3j",
    "thermal beta 1.5": "initial.kind = thermal\ninitial.beta = 1.5",
}


def main():
    ap = argparse.ArgumentParser(description="lossless resonant state swap")
    ap.add_argument("--omega", type=float, default=3.0)
    ap.add_argument("--g", type=float, default=0.25)
    ap.add_argument("--cutoff", type=int, default=20)
    ap.add_argument("--trace", action="store_true", help="print <n1>, <n2> over the swap for the Fock state")
    args = ap.parse_args()

    base = (f"params.omega1 = {args.omega}\nparams.omega2 = {args.omega}\n"
            f"params.g = {args.g}\ncutoffs.mode1 = {args.cutoff}\n")
    for name, init in INITIALS.items():
        rep = run_swap_demo(load_config(base + init))
        extra = "  ".join(f"{k}={v:.6g}" for k, v in sorted(rep.extras.items()))
        print(f"{name:<18} t={rep.time:.6f}  1-F={1 - rep.fidelity_mode2:.2e}  "
              f"mode1 vacuum dev={rep.vacuum_deviation_mode1:.1e}  {extra}")

    if args.trace:
        p = ModelParams(args.omega, args.omega, 0, 0, args.g)
        init = build_initial({"kind": "fock", "n": 3})
        n = np.arange(args.cutoff)
        print("time, <n1>, <n2>")
        for t in np.linspace(0, math.pi / (2 * args.g), 11):
            n1 = np.real(np.diag(reduced_density(p, init, 1, args.cutoff, t).data)) @ n
            n2 = np.real(np.diag(reduced_density(p, init, 2, args.cutoff, t).data)) @ n
            print(f"{t:.4f}, {n1:.6f}, {n2:.6f}")


if __name__ == "__main__":
    main()
