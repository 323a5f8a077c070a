"""Raising an entry rate or lowering an exit rate moves the current one way.

Runs coupled chains for a left-boundary gap and a right-boundary gap and
prints the integrated current difference with its standard error next to
the predicted sign, along with the exact pathwise checks.
"""

import argparse

from qsasep.coupling import monotonicity_current_experiment
from qsasep.rates import Liggett, ModelSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=64)
    ap.add_argument("--replicas", type=int, default=20)
    ap.add_argument("--seed", type=int, default=77)
    args = ap.parse_args()

    cases = {
        "left gap  (0.2 vs 0.4, right 0.5)": (Liggett(0.2, 0.5), Liggett(0.4, 0.5)),
        "right gap (left 0.3, 0.2 vs 0.8)": (Liggett(0.3, 0.2), Liggett(0.3, 0.8)),
    }
    for name, (lo, hi) in cases.items():
        spec = ModelSpec(args.N, 1.0, 1.0, lo, T=0.5)
        star = ModelSpec(args.N, 1.0, 1.0, hi, T=0.5)
        rep = monotonicity_current_experiment(spec, star, replicas=args.replicas, seed=args.seed)
        d, se = rep.difference
        print(f"{name}: J* - J = {d:+.4f} +- {se:.4f}, expected sign {'>= 0' if rep.direction == 'le' else '<= 0'}, "
              f"ordering {rep.ordering_exact}, identity {rep.identity_exact}, ok {rep.ok}")


if __name__ == "__main__":
    main()
