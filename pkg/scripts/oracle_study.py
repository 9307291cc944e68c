"""Random bang-bang trajectories against the solved rho, over several seeds.

    python scripts/oracle_study.py --k 0.3 0.5 --trials 1000 --seeds 0 1 7
"""

import argparse

import numpy as np

from abstab.analysis import expand_example
from abstab.hjb import solve
from abstab.plant import PolarField
from abstab.simulate import oracle_check


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--k", type=float, nargs="+", default=[0.3, 0.5])
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 7])
    ap.add_argument("--dkappa", type=float, default=0.01)
    args = ap.parse_args()
    for k in args.k:
        plant, spec = expand_example(k, 1.0, 4.0, 1.0)
        field = solve(plant, spec, args.dkappa, 20, keep="pi")
        for seed in args.seeds:
            rep = oracle_check(field, PolarField(plant), spec, args.trials, seed=seed, raise_on_violation=False)
            q = np.quantile(rep.ratios, [0.5, 0.99])
            print(f"k={k} seed={seed}: violations={rep.violations} max={rep.max_ratio:.4f} "
                  f"median={q[0]:.4f} p99={q[1]:.4f}")


if __name__ == "__main__":
    main()
