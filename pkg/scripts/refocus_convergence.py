"""Trotterised echo evolution against ideal nearest-neighbour evolution on the saw-tooth chain."""
import argparse

import numpy as np

from nvbus import planner


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sites", type=int, default=8)
    ap.add_argument("--kappa-t", type=float, default=0.5)
    ap.add_argument("--steps", type=int, nargs="+", default=[4, 8, 16, 32, 64])
    args = ap.parse_args()
    full, nn = planner.sawtooth_model(args.sites, 2), planner.sawtooth_model(args.sites, 1)
    T = args.kappa_t / max(nn.meta["kappas"])
    taus, errs = [], []
    for n in args.steps:
        err = planner.trotter_error(planner.echo_schedule_nnn(T / n, n, args.sites), full, nn)
        taus.append(T / n)
        errs.append(err)
        print(f"steps {n:3d}  segment {T / n * 1e6:8.3f} us  error {err:.3e}")
    print(f"slope over last three points: {np.polyfit(np.log(taus[-3:]), np.log(errs[-3:]), 1)[0]:.3f}")


if __name__ == "__main__":
    main()
