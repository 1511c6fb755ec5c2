"""Command-line front end for the verification harness.

Exit status: 0 when every check passes, 1 on any failed check, 2 on bad
configuration.  Reports are deterministic for a fixed scenario and seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time

import numpy as np

from .errors import ConfigError, DomainError
from .harness import Report, Scenario, run, scan
from .spaces import SpaceFormSpec


def parse_space(text: str) -> dict:
    """FAMILY:n:rho, e.g. CH:2:-4 or CP:3:2 or C:2:0."""
    try:
        fam, n, rho = text.split(":")
        return {"family": fam, "n": int(n), "rho": float(rho)}
    except ValueError:
        raise ConfigError(f"bad --space value {text!r}; expected FAMILY:n:rho")


def _common(parser):
    parser.add_argument("--space", default="CH:2:-4", help="FAMILY:n:rho (default CH:2:-4)")
    parser.add_argument("--grid", type=int, default=64, help="grid resolution per axis")
    parser.add_argument("--seed", type=int, default=0, help="seed for random sampling")
    parser.add_argument("--out", default=None, help="directory for report.json and CSV artifacts")
    parser.add_argument("--format", choices=("json", "csv"), default="json", help="stdout payload format")


def _emit(report: Report, args) -> int:
    for r in report.results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name}: residual={r.value:.6e} tol={r.tolerance:.1e}", file=sys.stderr)
    for name, dt in report.timings.items():
        print(f"# timing {name}: {dt:.3f}s", file=sys.stderr)
    if args.format == "json":
        print(report.to_json())
    else:
        w = csv.writer(sys.stdout)
        w.writerow(["name", "residual", "tolerance", "pass"])
        for r in report.results:
            w.writerow([r.name, repr(r.value), repr(r.tolerance), r.passed])
    return 0 if report.passed else 1


def main(argv=None) -> int:
    top = argparse.ArgumentParser(prog="cosymgeo", description=__doc__)
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-space", help="curvature and structure-tensor suites of the ambient space")
    _common(p)

    p = sub.add_parser("cylinder", help="vertical cylinder over a constant- or varying-curvature curve")
    _common(p)
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--tau", type=float, default=0.0)
    p.add_argument("--length", type=float, default=None)
    p.add_argument("--checks", default=None, help="comma-separated check names")

    p = sub.add_parser("sphere", help="rotational cmc sphere by shooting")
    _common(p)
    p.add_argument("--H", type=float, required=True, dest="H")
    p.add_argument("--checks", default=None)

    p = sub.add_parser("scan", help="parameter sweep producing a CSV of residuals")
    _common(p)
    p.add_argument("--subject", choices=("cylinder", "sphere"), default="cylinder")
    p.add_argument("--param", required=True, help="kappa | tau | H")
    p.add_argument("--range", required=True, help="lo:hi:count")
    p.add_argument("--tau", type=float, default=0.0)

    p = sub.add_parser("run", help="run a scenario config file (JSON)")
    p.add_argument("config")
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("json", "csv"), default="json")

    args = top.parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    if args.command == "run":
        with open(args.config) as fh:
            payload = json.load(fh)
        scenarios = payload if isinstance(payload, list) else [payload]
        ok = True
        for i, sc in enumerate(scenarios):
            out = args.out if len(scenarios) == 1 else (f"{args.out}/scenario{i}" if args.out else None)
            report = run(Scenario.from_dict(sc), out_dir=out)
            print(report.to_json())
            ok = ok and report.passed
        return 0 if ok else 1

    space = parse_space(args.space)
    if args.command == "check-space":
        scenario = {"space": space, "subject": {"kind": "space-checks"}, "grid": args.grid, "seed": args.seed}
        return _emit(run(Scenario.from_dict(scenario), out_dir=args.out), args)

    if args.command == "cylinder":
        subject = {"kind": "cylinder", "kappa": args.kappa, "tau": args.tau}
        if args.length:
            subject["length"] = args.length
        scenario = {"space": space, "subject": subject, "grid": args.grid, "seed": args.seed}
        if args.checks:
            scenario["checks"] = args.checks.split(",")
        return _emit(run(Scenario.from_dict(scenario), out_dir=args.out), args)

    if args.command == "sphere":
        scenario = {
            "space": space,
            "subject": {"kind": "sphere", "H": args.H},
            "grid": args.grid,
            "seed": args.seed,
        }
        if args.checks:
            scenario["checks"] = args.checks.split(",")
        return _emit(run(Scenario.from_dict(scenario), out_dir=args.out), args)

    if args.command == "scan":
        try:
            lo, hi, count = args.range.split(":")
            values = np.linspace(float(lo), float(hi), int(count))
        except ValueError:
            raise ConfigError(f"bad --range {args.range!r}; expected lo:hi:count")
        subject = {"kind": args.subject}
        if args.subject == "cylinder":
            subject["tau"] = args.tau
            if args.param == "tau":
                subject["kappa"] = "matched"
        else:
            subject["H"] = float(values[0])
        scenario = {"space": space, "subject": subject, "grid": args.grid, "seed": args.seed, "checks": []}
        out_path = f"{args.out}/scan.csv" if args.out else None
        if out_path:
            import os

            os.makedirs(args.out, exist_ok=True)
        t0 = time.perf_counter()
        result = scan(Scenario.from_dict(scenario), args.param, values, out_path=out_path)
        print(f"# timing scan: {time.perf_counter() - t0:.3f}s", file=sys.stderr)
        print(json.dumps(result, indent=2))
        return 0

    raise ConfigError(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
