"""Reproduce the damped-oscillator study: rho rows at multiples of pi for k=0.3 and k=0.5,
verdicts, comparator bounds and the bisected damping threshold.

    python scripts/reproduce_example.py --out results/example
"""

import argparse
import json
import time
from pathlib import Path

from abstab.analysis import AnalysisConfig, bisect_threshold, run_analysis

BASE = {
    "plant": {"k": 0.5, "m_min": 1, "m_max": 4},
    "rates": {"eps": 1},
    "grid": {"dkappa": 0.01},
    "run": {"n_max": 20, "oracle_trials": 200, "seed": 0},
    "bisect": {"param": "k", "lo": 0.2, "hi": 0.7, "tol": 0.005},
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/example")
    ap.add_argument("--dkappa", type=float, default=0.01)
    args = ap.parse_args()
    out = Path(args.out)
    base = {**BASE, "grid": {"dkappa": args.dkappa}}

    summary = {}
    for k in (0.3, 0.5):
        cfg = AnalysisConfig.from_dict({**base, "plant": {**base["plant"], "k": k}})
        rep = run_analysis(cfg, out / f"k={k}", rho_stride=8)
        print(rep.summary())
        summary[f"k={k}"] = rep.to_dict()

    t0 = time.time()
    res = bisect_threshold(AnalysisConfig.from_dict({**base, "mode": "bisect"}))
    print(f"threshold k ~ {res.threshold:.5f} "
          f"[{res.last_unstable:.5f}, {res.first_stable:.5f}] in {time.time() - t0:.1f}s")
    summary["bisect"] = res.to_dict()
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
