"""Grid orchestration, theorem verdicts and trajectory output."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..flows import FlowConfig, extremal_flow
from ..invariants import InvariantConfig, evaluate
from ..invariants.lattice import Patch, lattice_points

CAVEAT = "numerical verdict on sampled region, not a proof"
UNRELIABLE_FRACTION = 0.2


@dataclass(frozen=True)
class RegionGrid:
    q1_range: tuple
    q2_range: tuple
    nq: int = 9
    u_samples: int = 16

    def __post_init__(self):
        if self.nq < 3:
            raise ValueError("nq must be at least 3")
        if self.u_samples < 8:
            raise ValueError("u_samples must be at least 8")
        for r in (self.q1_range, self.q2_range):
            if not (len(r) == 2 and r[1] > r[0]):
                raise ValueError(f"degenerate range {r!r}")

    @classmethod
    def from_region(cls, region, nq=9, u_samples=16):
        return cls(tuple(region["q1"]), tuple(region["q2"]), nq, u_samples)

    def points(self, control):
        """Flattened (q1, q2, u) in q1-major, then q2, then u order."""
        q1 = np.linspace(*self.q1_range, self.nq)
        q2 = np.linspace(*self.q2_range, self.nq)
        u = control.samples(self.u_samples)
        return tuple(a.ravel() for a in np.meshgrid(q1, q2, u, indexing="ij"))


def cmd_invariants(system, grid, cfg=None, level="full"):
    return evaluate(system, *grid.points(system.control), cfg or InvariantConfig(), level=level)


@dataclass
class TrivializabilityReport:
    sup_kappa: float
    sup_Lhb: float
    sup_Lvhb: float
    excluded: int
    excluded_reasons: dict
    samples: int
    threshold: float
    verdict_thm1: bool
    verdict_thm2: bool
    reliable: bool
    caveat: str = CAVEAT

    def summary(self):
        return asdict(self)


def report_from_grid(g, threshold=1e-5):
    ok = g.valid
    n = len(g.status)

    def sup(name):
        v = np.abs(g[name][ok])
        return float(v.max()) if v.size else math.inf

    sk, sl, sv = sup("kappa"), sup("Lhb"), sup("Lvhb")
    excluded = int(n - ok.sum())
    thm1 = sk < threshold and sl < threshold
    return TrivializabilityReport(
        sup_kappa=sk, sup_Lhb=sl, sup_Lvhb=sv, excluded=excluded, excluded_reasons=g.excluded(), samples=n,
        threshold=threshold, verdict_thm1=bool(thm1), verdict_thm2=bool(thm1 and sv < threshold),
        reliable=excluded <= UNRELIABLE_FRACTION * n)


def cmd_check(system, grid, cfg=None, threshold=1e-5):
    return report_from_grid(cmd_invariants(system, grid, cfg, level="verdict"), threshold)


def cmd_extremals(system, initial, t_end, out_dir=None, cfg=None):
    """Integrate one extremal per ``(q1, q2, u)`` in ``initial``; optionally write CSV files.

    Returns the trajectories and a JSON-ready summary.
    """
    cfg = cfg or FlowConfig()
    trajs, summary = [], []
    for k, (a, b, u0) in enumerate(initial):
        tr = extremal_flow(system, (a, b), u0, t_end, cfg)
        trajs.append(tr)
        entry = {"index": k, "q0": [a, b], "u0": u0, "t_end": float(tr.t[-1]), "status": tr.status,
                 "steps": tr.stats.steps, "rejected": tr.stats.rejected, "max_error": tr.stats.max_error}
        if out_dir is not None:
            out_dir = Path(out_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            path = out_dir / f"extremal_{k:03d}.csv"
            lines = ["t,q1,q2,u"] + [",".join(repr(float(x)) for x in (t, q[0], q[1], u))
                                     for t, q, u in zip(tr.t, tr.q, tr.u)]
            path.write_text("\n".join(lines) + "\n")
            entry["file"] = path.name
        summary.append(entry)
    return trajs, summary


def frame_bracket_residual(system, q1, q2, u, h=1e-3):
    """``|[f, df/du]|`` at each sample, all derivatives by lattice differences of f alone."""
    Q1, Q2, U = lattice_points(q1, q2, u, h, 2, 2)
    vj = system.jets(Q1, Q2, U)
    F = [Patch(vj.f[i], h) for i in range(2)]
    Fu = [F[i].d(2) for i in range(2)]
    br = [F[0] * Fu[i].d(0) + F[1] * Fu[i].d(1) - Fu[0] * F[i].d(0) - Fu[1] * F[i].d(1) for i in range(2)]
    return np.hypot(br[0].center(), br[1].center())


def cmd_generate(family, grid, cfg=None, half_width=1.5, threshold=1e-5, level="kappa"):
    """Generate the commuting system of ``family`` and tabulate f, the frame bracket and kappa."""
    from ..flows import generate_commuting_system

    system = generate_commuting_system(family, half_width=half_width)
    q1, q2, u = grid.points(system.control)
    vj = system.jets(q1, q2, u)
    bracket = frame_bracket_residual(system, q1, q2, u)
    g = evaluate(system, q1, q2, u, cfg or InvariantConfig(), level=level)
    table = {"q1": q1, "q2": q2, "u": u, "f1": vj.f[0], "f2": vj.f[1], "bracket": bracket,
             "kappa": g["kappa"], "status": g.status}
    ok = g.valid
    summary = {"system": system.describe(), "sup_bracket": float(np.max(bracket)),
               "sup_kappa": float(np.max(np.abs(g["kappa"][ok]))) if ok.any() else math.inf,
               "excluded": int((~ok).sum()), "samples": int(ok.size), "threshold": threshold}
    if level == "verdict":
        summary["report"] = report_from_grid(g, threshold).summary()
    return system, table, summary


def table_csv(table, columns):
    lines = [",".join(columns)]
    for i in range(len(table[columns[0]])):
        lines.append(",".join(table[c][i] if c == "status" else repr(float(table[c][i])) for c in columns))
    return "\n".join(lines) + "\n"


def dumps(obj):
    def default(o):
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        raise TypeError(type(o).__name__)

    return json.dumps(obj, indent=2, sort_keys=True, default=default) + "\n"
