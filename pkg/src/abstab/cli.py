"""Command line: ``abstab analyze|bisect|sweep --config FILE``.

Exit codes: 0 completed (any verdict), 2 invalid config, 3 not oscillatory,
4 CFL unsatisfiable, 5 oracle violation, 6 bisection bracket error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import analysis, io
from .errors import AbstabError


def _parser():
    p = argparse.ArgumentParser(prog="abstab", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="solve and decide for one configuration")
    a.add_argument("--config", required=True)
    a.add_argument("--out", default=None, help="directory for rho.csv, rows_at_pi.csv, verdict.json, ...")
    a.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    a.add_argument("--no-rho", action="store_true", help="skip the full rho.csv")
    a.add_argument("--rho-stride", type=int, default=1, help="write every n-th row to rho.csv")

    b = sub.add_parser("bisect", help="locate the stability threshold in one parameter")
    b.add_argument("--config", required=True)
    b.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    b.add_argument("--out", default=None)

    s = sub.add_parser("sweep", help="analyse a range of one parameter")
    s.add_argument("--config", required=True)
    s.add_argument("--param", required=True, metavar="KEY=START:STOP:STEP")
    s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    s.add_argument("--out", default=None)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "analyze":
            cfg = analysis.load_config(args.config, args.param)
            rep = analysis.run_analysis(cfg, args.out, write_rho=not args.no_rho,
                                        rho_stride=args.rho_stride)
            print(rep.summary())
            print(json.dumps(rep.to_dict(), sort_keys=True))
        elif args.command == "bisect":
            cfg = analysis.load_config(args.config, args.param)
            res = analysis.bisect_threshold(cfg)
            param = cfg.bisect.param
            print(f"threshold {param} ~ {res.threshold:.6g} "
                  f"(last Unstable {res.last_unstable:.6g}, first Stable {res.first_stable:.6g})")
            if res.inconclusive_band:
                print(f"  Inconclusive band: [{res.inconclusive_band[0]:.6g}, {res.inconclusive_band[1]:.6g}]")
            if args.out:
                io.write_json(res.to_dict(), f"{args.out}/bisect.json")
            print(json.dumps({k: v for k, v in res.to_dict().items() if k != "trace"}, sort_keys=True))
        else:
            cfg = analysis.load_config(args.config, args.set)
            name, values = analysis.parse_range(args.param)
            rows = analysis.sweep(cfg, name, values, args.out)
            for r in rows:
                print(f"{name}={r['value']:g}: {r['status']}"
                      + (f" (N={r['witness_N']})" if r["witness_N"] else ""))
            print(json.dumps(rows))
    except AbstabError as exc:
        print(f"abstab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
