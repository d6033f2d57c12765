"""Command-line interface: ``ctrlcurv invariants|check|extremals|generate|selftest``.

Exit codes: 0 ok, 1 usage or input error, 2 numerical failure, 3 verdict unreliable.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from ..expr import ExpressionError
from ..flows import FlowConfig, MoserFamily, StepSizeUnderflow, TransportBlowUp
from ..invariants import InvariantConfig, RegularityError, StencilError
from .commands import RegionGrid, cmd_check, cmd_extremals, cmd_generate, cmd_invariants, dumps, table_csv
from .io import RegularityViolation, SystemFileError, invariants_csv, invariants_json, load_system

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_UNRELIABLE = 0, 1, 2, 3

log = logging.getLogger("ctrlcurv")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_grid(text):
    """``Q1LO:Q1HI,Q2LO:Q2HI[,N]`` -> (q1 range, q2 range, nq or None)."""
    parts = text.split(",")
    if len(parts) not in (2, 3):
        raise argparse.ArgumentTypeError("expected Q1LO:Q1HI,Q2LO:Q2HI[,N]")
    try:
        r1 = tuple(float(x) for x in parts[0].split(":"))
        r2 = tuple(float(x) for x in parts[1].split(":"))
        n = int(parts[2]) if len(parts) == 3 else None
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    if len(r1) != 2 or len(r2) != 2:
        raise argparse.ArgumentTypeError("each range is LO:HI")
    return r1, r2, n


def _grid(args, region):
    r1, r2, n = args.grid if args.grid else (tuple(region["q1"]), tuple(region["q2"]), None)
    try:
        return RegionGrid(r1, r2, n or args.nq, args.u_samples)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _cfg(args):
    return InvariantConfig(fd_step=args.fd_step)


def _emit(text, out):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _load(path, want_family=False):
    loaded = load_system(path)
    if want_family != isinstance(loaded.system, MoserFamily):
        kind = "a moser family" if want_family else "a control system (not a moser family)"
        raise UsageError(f"{path}: expected {kind}")
    return loaded


# ---------------------------------------------------------------- commands

def run_invariants(args):
    loaded = _load(args.system)
    g = cmd_invariants(loaded.system, _grid(args, loaded.region), _cfg(args))
    _emit(invariants_csv(g) if args.format == "csv" else invariants_json(g), args.out)
    bad = len(g.status) - int(g.valid.sum())
    if bad:
        log.warning("%d of %d samples excluded", bad, len(g.status))
    return EXIT_OK


def run_check(args):
    loaded = _load(args.system)
    rep = cmd_check(loaded.system, _grid(args, loaded.region), _cfg(args), args.tol)
    _emit(dumps(rep.summary()), args.out)
    return EXIT_OK if rep.reliable else EXIT_UNRELIABLE


def _initial_conditions(args, region):
    if args.ic:
        return [tuple(float(x) for x in ic.split(",")) for ic in args.ic]
    q0 = (0.5 * sum(region["q1"]), 0.5 * sum(region["q2"]))
    return [(q0[0], q0[1], 2 * math.pi * k / args.angles) for k in range(args.angles)]


def run_extremals(args):
    loaded = _load(args.system)
    ics = _initial_conditions(args, loaded.region)
    for ic in ics:
        if len(ic) != 3:
            raise UsageError("--ic takes Q1,Q2,U")
    cfg = FlowConfig(rtol=args.tol, atol=args.tol, invariants=_cfg(args),
                     method="rk4" if args.rk4 else "dopri5")
    out_dir = Path(args.out) if args.out else None
    _, summary = cmd_extremals(loaded.system, ics, args.t_end, out_dir, cfg)
    text = dumps({"trajectories": summary})
    if out_dir is not None:
        (out_dir / "summary.json").write_text(text)
    else:
        sys.stdout.write(text)
    stopped = [s for s in summary if s["status"] != "ok"]
    return EXIT_NUMERICAL if stopped else EXIT_OK


def run_generate(args):
    loaded = _load(args.family, want_family=True)
    level = "verdict" if args.check else "kappa"
    _, table, summary = cmd_generate(loaded.system, _grid(args, loaded.region), _cfg(args),
                                     half_width=loaded.raw.get("half_width", 1.5), threshold=args.tol,
                                     level=level)
    cols = ["q1", "q2", "u", "f1", "f2", "bracket", "kappa", "status"]
    if args.format == "csv":
        _emit(table_csv(table, cols), args.out)
    else:
        _emit(dumps({"summary": summary, "rows": {c: table[c] for c in cols}}), args.out)
    sys.stderr.write(dumps(summary))
    return EXIT_OK


def run_selftest(args):
    from .battery import run_battery

    results = run_battery(quick=args.quick, inject_fault=args.inject_fault)
    for r in results:
        sys.stderr.write(r.line() + "\n")
    summary = {"passed": all(r.passed for r in results), "quick": bool(args.quick),
               "checks": [{"name": r.name, "passed": bool(r.passed), "value": r.value, "tol": r.tol,
                           "detail": r.detail, "seconds": round(r.seconds, 3)} for r in results]}
    _emit(dumps(summary), args.out)
    return EXIT_OK if summary["passed"] else EXIT_NUMERICAL


# ------------------------------------------------------------------ parser

def build_parser():
    p = _Parser(prog="ctrlcurv", description="Feedback invariants of planar control systems.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, system=True):
        if system:
            sp.add_argument("system", help="system definition (JSON)")
        sp.add_argument("--grid", type=parse_grid, metavar="Q1LO:Q1HI,Q2LO:Q2HI[,N]",
                        help="sample region and points per axis (use --grid=... for negative bounds)")
        sp.add_argument("--nq", type=int, default=9, help="points per q axis when --grid has no N")
        sp.add_argument("--u-samples", type=int, default=16)
        sp.add_argument("--fd-step", type=float, default=1e-3)
        sp.add_argument("--tol", type=float, default=1e-5)
        sp.add_argument("--out", help="output file (default stdout)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")

    common(sub.add_parser("invariants", help="tabulate c, b, kappa, derived fields and residuals"))
    common(sub.add_parser("check", help="trivializability verdicts on a region"))
    sp = sub.add_parser("extremals", help="integrate extremal trajectories")
    common(sp)
    sp.set_defaults(tol=1e-9)
    sp.add_argument("--ic", action="append", metavar="Q1,Q2,U", help="initial condition (repeatable)")
    sp.add_argument("--angles", type=int, default=8, help="fan of initial controls at the region centre")
    sp.add_argument("--t-end", type=float, default=1.0)
    sp.add_argument("--rk4", action="store_true", help="fixed-step RK4 instead of adaptive")
    sp = sub.add_parser("generate", help="commuting-frame system from a Moser family")
    common(sp, system=False)
    sp.add_argument("family", help="moser family definition (JSON)")
    sp.add_argument("--check", action="store_true", help="also compute the full verdict report")
    sp = sub.add_parser("selftest", help="run the acceptance battery")
    sp.add_argument("--quick", action="store_true")
    sp.add_argument("--out")
    sp.add_argument("--inject-fault", choices=("b-sign",), help=argparse.SUPPRESS)
    return p


COMMANDS = {"invariants": run_invariants, "check": run_check, "extremals": run_extremals,
            "generate": run_generate, "selftest": run_selftest}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, SystemFileError, RegularityViolation, ExpressionError, FileNotFoundError) as exc:
        sys.stderr.write(f"ctrlcurv: error: {exc}\n")
        return EXIT_USAGE
    except (RegularityError, StencilError, StepSizeUnderflow, TransportBlowUp, FloatingPointError) as exc:
        sys.stderr.write(f"ctrlcurv: numerical failure: {exc}\n")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
