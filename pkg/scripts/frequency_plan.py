"""Line plan for one gradient and a scan over zeta = G / 3 (MHz)."""
import argparse

import numpy as np

from nvbus.planner import build_frequency_plan, search_gradient


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gradient", type=float, default=150e6, help="Hz per row")
    ap.add_argument("--rows", type=int, default=64)
    ap.add_argument("--nv-base", type=float, default=None)
    ap.add_argument("--csv", default=None)
    args = ap.parse_args()
    plan = build_frequency_plan(args.gradient, args.rows, nv_base=args.nv_base)
    a, b = plan.closest_pair
    print(f"min spacing {plan.min_spacing / 1e6:.3f} MHz between {a.label}@row{a.row} and {b.label}@row{b.row}")
    if args.csv:
        plan.to_csv(args.csv)
    zetas = sorted(set(np.round(np.linspace(20, 100, 81), 6)) | {3000 / (3 * n + 1) for n in range(9, 50)})
    for c in search_gradient(zetas, args.rows, nv_base=args.nv_base)[:10]:
        print(f"zeta {c.zeta:8.3f} MHz  spacing {c.min_spacing / 1e6:7.3f} MHz  admissible {c.admissible}")


if __name__ == "__main__":
    main()
