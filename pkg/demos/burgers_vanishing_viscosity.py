"""Viscous Burgers solutions approach the quasi-static oracle as eps -> 0.

Evolves the regularised equation with a cosine ramp of the left
reservoir for a decreasing sequence of eps and prints the sup-distance
of the interior density and of the flux from the oracle.  With the
default right value the data stay in the low-density phase and the
distances fall roughly like eps.  ``--right 0.8`` makes the data cross
the critical line; the shock then has to traverse the domain at a speed
that vanishes on the line, and convergence is much slower.
"""

import argparse

from qsasep.burgers import quasi_static_sweep
from qsasep.rates import Schedule


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--M", type=int, default=200)
    ap.add_argument("--epsilons", default="0.3,0.1,0.03,0.01")
    ap.add_argument("--right", type=float, default=0.3)
    args = ap.parse_args()

    eps = [float(e) for e in args.epsilons.split(",")]
    left = Schedule.cosine(0.1, 0.35, 1.0)
    runs = quasi_static_sweep(eps, left, args.right, T=1.0, M=args.M)
    for r in runs:
        print(f"eps={r.epsilon:<6g} density distance {r.density_distance:.4f}  "
              f"flux distance {r.flux_distance:.5f}  steps {r.steps}")


if __name__ == "__main__":
    main()
