"""Adiabatic pair-swap infidelity versus kappa*t_ss for the three ramp shapes."""
import argparse
import csv
import sys

import numpy as np

from nvbus.protocols import windowed_pair_infidelity


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--kappa", type=float, default=10e3)
    ap.add_argument("--kt", type=float, nargs="+", default=[5, 10, 20, 40, 80])
    ap.add_argument("--shapes", nargs="+", default=["local", "tanh", "linear"])
    args = ap.parse_args()
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["shape", "kappa_t", "windowed_infidelity"])
    for shape in args.shapes:
        vals = [windowed_pair_infidelity(args.kappa, kt / args.kappa, shape=shape) for kt in args.kt]
        for kt, v in zip(args.kt, vals):
            w.writerow([shape, kt, repr(v)])
        slope = np.polyfit(np.log(args.kt), np.log(vals), 1)[0]
        print(f"# {shape}: log-log slope {slope:.3f}", file=sys.stderr)


if __name__ == "__main__":
    main()
