"""Command line interface: run scenarios, list built-ins, re-check traces.

Exit codes: 0 pass, 1 expectation failure, 2 flow error, 3 config error.
"""

import argparse
import json
import os
import sys

from . import monitors
from .errors import LagflowError, ParseError, ValidationError
from .flow import FlowTrace
from .scenarios import list_scenarios, load_scenario, run_scenario


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="lagflow",
        description="Mean curvature flow of Lagrangian immersions with "
                    "quantitative verification monitors")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario file or built-in")
    p_run.add_argument("scenario", help="path to a scenario file or a built-in name")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--resolution", type=int, help="override grid resolution")
    p_run.add_argument("--cfl", type=float, help="override the CFL coefficient")
    p_run.add_argument("--t-max", type=float, help="override the final time")
    p_run.add_argument("--seed", type=int, help="override the sampling seed")

    sub.add_parser("list", help="list built-in scenarios")

    p_check = sub.add_parser("check", help="re-run trace monitors on a stored trace.csv")
    p_check.add_argument("trace", help="path to trace.csv")
    p_check.add_argument("--scenario", help="scenario file or built-in for metadata")
    p_check.add_argument("--rbar", type=float, help="ambient scalar curvature")
    p_check.add_argument("--dim", type=int, help="intrinsic dimension")
    p_check.add_argument("--k0", type=float, help="ambient curvature sup norm")

    args = parser.parse_args(argv)
    try:
        if args.command == "list":
            return cmd_list()
        if args.command == "run":
            return cmd_run(args)
        return cmd_check(args)
    except (ParseError, ValidationError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 3
    except LagflowError as exc:
        print(f"flow error: {exc}", file=sys.stderr)
        return 2


def cmd_list():
    for entry in list_scenarios():
        print(f"{entry['name']:24s} {entry['description']}")
    return 0


def cmd_run(args):
    config = load_scenario(args.scenario)
    overrides = {"resolution": args.resolution, "flow.cfl": args.cfl,
                 "flow.t_max": args.t_max, "seed": args.seed}
    for key, val in overrides.items():
        if val is not None:
            config.values[key] = val
    status, summary = run_scenario(config, args.out)
    for exp in summary["expectations"]:
        mark = "pass" if exp["pass"] else "FAIL"
        print(f"[{mark}] expectation {exp['name']}: measured={exp['measured']}")
    print(f"checks: {summary['checks_passed']} passed, "
          f"{summary['checks_failed']} failed")
    print(f"flow: {summary['flow']['status']} at t={summary['flow']['t_final']:.6g} "
          f"({summary['flow']['steps']} steps)")
    print(f"exit status {status}")
    return status


def _metadata_from(args):
    if args.scenario:
        cfg = load_scenario(args.scenario)
        from .scenarios import build_initial
        imm, _ = build_initial(cfg)
        sp = imm.space
        return sp.scalar_curvature, imm.topology.ndim, sp.curvature_bounds[0]
    if args.rbar is not None and args.dim is not None:
        return args.rbar, args.dim, args.k0 if args.k0 is not None else 0.0
    sibling = os.path.join(os.path.dirname(os.path.abspath(args.trace)),
                           "summary.json")
    if os.path.exists(sibling):
        with open(sibling) as fh:
            summary = json.load(fh)
        name = summary.get("scenario")
        if name:
            try:
                cfg = load_scenario(name)
                from .scenarios import build_initial
                imm, _ = build_initial(cfg)
                sp = imm.space
                return sp.scalar_curvature, imm.topology.ndim, sp.curvature_bounds[0]
            except LagflowError:
                pass
    return None


def cmd_check(args):
    trace = FlowTrace.read_csv(args.trace)
    meta = _metadata_from(args)
    checks = [monitors.volume_monotonic_check(trace),
              monitors.short_time_doubling_check(trace)]
    if meta is not None:
        rbar, n, k0 = meta
        checks.append(monitors.gronwall_check(trace, rbar, n, exact=False))
        checks.append(monitors.eigen_bound_check(trace, rbar, n, k0))
    else:
        print("note: no ambient metadata (--scenario or --rbar/--dim); "
              "running metadata-free checks only")
    try:
        fit = monitors.decay_rate_fit(trace)
        print(f"decay fit: slope={fit['slope']:.6g} "
              f"ci95=({fit['ci95'][0]:.6g}, {fit['ci95'][1]:.6g}) "
              f"window={fit['window']}")
    except LagflowError as exc:
        print(f"decay fit unavailable: {exc}")
    ok = True
    for c in checks:
        mark = "pass" if c["pass"] else "FAIL"
        ok = ok and c["pass"]
        print(f"[{mark}] {c['name']}: margin={c['margin']:.4g}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
