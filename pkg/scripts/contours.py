"""Infidelity over (T1, total time) for both protocols, CSV plus contour JSON."""
import argparse
import os

import numpy as np

from nvbus.budget import contour_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="contours_out")
    ap.add_argument("--spacing", choices=["kappa_over_n", "band"], default="kappa_over_n")
    ap.add_argument("--points", type=int, default=121)
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    T1 = np.geomspace(0.01, 10.0, 31)
    t = np.geomspace(1e-4, 1.0, args.points)
    for method in ("SS", "FFST"):
        g = contour_grid(method, T1, t, spacing=args.spacing)
        g.to_csv(os.path.join(args.out, f"{method.lower()}_grid.csv"))
        g.to_json(os.path.join(args.out, f"{method.lower()}_contours.json"))
        print(f"{method}: min over time at T1=0.1 s -> {g.minimum_over_time(0.1):.4g}")


if __name__ == "__main__":
    main()
