"""State-transfer probability versus NV detuning from the target mode."""
import argparse
import csv
import sys

import numpy as np

from nvbus.protocols import fastest_modes, ffst_transfer, ffst_tune


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=5)
    ap.add_argument("--kappa", type=float, default=12.6e3)
    ap.add_argument("--g", type=float, default=0.05, help="coupling in units of kappa")
    args = ap.parse_args()
    tun = ffst_tune(args.n, args.kappa, fastest_modes(args.n)[-1], args.g * args.kappa)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["detune_over_spacing", "transfer_probability"])
    for x in np.linspace(-1.2, 1.2, 49):
        r = ffst_transfer(tun, detune=x * tun.mode_spacing, unpolarized=False)
        w.writerow([f"{x:.3f}", repr(r.extras["transfer_probability"])])


if __name__ == "__main__":
    main()
