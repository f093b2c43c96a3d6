"""Maximum-likelihood recovery of phi on a queen lattice.

Prints the admissible interval, then mean/sd of phi-hat over replicates for
a range of true values inside it.

    python3 scripts/car_recovery.py --size 10 --reps 100
"""

import argparse

import numpy as np

from countyrisk.car import fit_car, phi_bounds
from countyrisk.graph import weights
from countyrisk.synth import gen_car_field, grid_graph


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=10)
    ap.add_argument("--reps", type=int, default=100)
    ap.add_argument("--rook", action="store_true", help="rook instead of queen contiguity")
    ap.add_argument("--phi", type=float, nargs="*", help="true values (default: spread over the interval)")
    args = ap.parse_args()

    w = weights(grid_graph(args.size, args.size, queen=not args.rook), "binary")
    lo, hi = phi_bounds(w)
    print(f"{args.size}x{args.size} {'rook' if args.rook else 'queen'}: admissible phi in ({lo:.5f}, {hi:.5f})")
    values = args.phi or [round(v, 3) for v in np.linspace(0, hi, 6)[:-1]] + [round(0.95 * hi, 4)]
    print(f"{'true':>8} {'mean':>9} {'bias':>9} {'sd':>8}")
    for phi in values:
        if not lo < phi < hi:
            print(f"{phi:8.4f}   outside the admissible interval; no field can be drawn")
            continue
        est = np.array([fit_car(gen_car_field(w, phi, 1.0, 0.0, seed=s), w).phi for s in range(args.reps)])
        print(f"{phi:8.4f} {est.mean():9.4f} {est.mean() - phi:+9.4f} {est.std(ddof=1):8.4f}")


if __name__ == "__main__":
    main()
