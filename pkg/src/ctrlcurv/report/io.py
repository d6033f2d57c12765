"""System-definition files (JSON) and table serialisation."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import jsonschema
import numpy as np

from ..expr import ExpressionError, parse, variables
from .. import systems as S

_EXPR = {"type": "string", "minLength": 1}
_PAIR = {"type": "array", "items": _EXPR, "minItems": 2, "maxItems": 2}
_RANGE = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

SYSTEM_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["kind"],
    "properties": {
        "schema": {"const": "1"},
        "name": {"type": "string"},
        "description": {"type": "string"},
        "kind": {"enum": ["general", "riemannian", "zermelo", "cozermelo", "moser"]},
        "f": _PAIR,
        "e1": _PAIR,
        "e2": _PAIR,
        "drift": _PAIR,
        "drift_components": {"enum": ["frame", "coordinates"]},
        "ups": _PAIR,
        "a1": _EXPR,
        "a2": _EXPR,
        "sign": {"enum": [1, -1]},
        "u0": {"type": "number"},
        "half_width": {"type": "number", "exclusiveMinimum": 0},
        "control": {
            "oneOf": [
                {"type": "object", "properties": {"type": {"const": "circle"}}, "required": ["type"],
                 "additionalProperties": False},
                {"type": "object", "properties": {"type": {"const": "interval"}, "lo": {"type": "number"},
                                                  "hi": {"type": "number"}},
                 "required": ["type", "lo", "hi"], "additionalProperties": False},
            ]
        },
        "epsilon_hint": {"enum": [1, -1]},
        "region": {"type": "object", "properties": {"q1": _RANGE, "q2": _RANGE}, "required": ["q1", "q2"],
                   "additionalProperties": False},
    },
    "additionalProperties": False,
    "allOf": [
        {"if": {"properties": {"kind": {"const": "general"}}}, "then": {"required": ["f"]}},
        {"if": {"properties": {"kind": {"const": "riemannian"}}}, "then": {"required": ["e1", "e2"]}},
        {"if": {"properties": {"kind": {"const": "zermelo"}}}, "then": {"required": ["e1", "e2", "drift"]}},
        {"if": {"properties": {"kind": {"const": "cozermelo"}}}, "then": {"required": ["e1", "e2", "ups"]}},
        {"if": {"properties": {"kind": {"const": "moser"}}}, "then": {"required": ["a1", "a2"]}},
    ],
}

DEFAULT_REGION = {"q1": [-0.5, 0.5], "q2": [-0.5, 0.5]}


class SystemFileError(ValueError):
    """Schema violation or unparsable expression; ``path`` locates the field."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class RegularityViolation(ValueError):
    def __init__(self, failures):
        self.failures = failures
        head = "; ".join(f"(q1={a:.3g}, q2={b:.3g}, u={c:.3g}): {why}" for a, b, c, why in failures[:5])
        more = f" (+{len(failures) - 5} more)" if len(failures) > 5 else ""
        super().__init__(f"regularity spot-check failed at {len(failures)} point(s): {head}{more}")


class LoadedSystem:
    """A parsed definition: the system (or Moser family) plus its documented region."""

    def __init__(self, system, region, name, raw):
        self.system = system
        self.region = region
        self.name = name
        self.raw = raw


def _expr(doc, key, index=None, allowed=("q1", "q2", "u")):
    text = doc[key] if index is None else doc[key][index]
    path = key if index is None else f"{key}[{index}]"
    try:
        e = parse(text)
    except ExpressionError as exc:
        raise SystemFileError(str(exc), path) from None
    extra = variables(e) - set(allowed)
    if extra:
        raise SystemFileError(f"variables {sorted(extra)} not allowed here", path)
    return e


def _pair(doc, key, allowed=("q1", "q2", "u")):
    return [_expr(doc, key, i, allowed) for i in range(2)]


def system_from_dict(doc, spot_check=True):
    try:
        jsonschema.validate(doc, SYSTEM_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SystemFileError(exc.message, path) from None
    kind = doc["kind"]
    hint = doc.get("epsilon_hint")
    region = doc.get("region", DEFAULT_REGION)
    name = doc.get("name", kind)
    if kind == "moser":
        from ..flows.moser import MoserFamily

        fam = MoserFamily(_expr(doc, "a1", allowed=("u",)), _expr(doc, "a2", allowed=("u", "q2")),
                          doc.get("sign", 1), doc.get("u0", 0.0))
        return LoadedSystem(fam, region, name, doc)
    if kind == "general":
        ctl = doc.get("control", {"type": "circle"})
        control = (S.ControlDomain.circle() if ctl["type"] == "circle"
                   else S.ControlDomain.interval(ctl["lo"], ctl["hi"]))
        f = _pair(doc, "f")
        sys = S.general(f[0], f[1], control, hint)
    else:
        qonly = ("q1", "q2")
        frame = S.FramePair(tuple(_pair(doc, "e1", qonly)), tuple(_pair(doc, "e2", qonly)))
        if kind == "riemannian":
            sys = S.riemannian(frame, None, hint)
        elif kind == "zermelo":
            X = _pair(doc, "drift", qonly)
            if doc.get("drift_components", "frame") == "coordinates":
                X = S.drift_frame_components(frame, *X)
            sys = S.zermelo(frame, None, X[0], X[1], hint)
        else:
            ups = _pair(doc, "ups", qonly)
            sys = S.cozermelo(frame, None, ups[0], ups[1], hint)
    if spot_check:
        failures = spot_check_regularity(sys, region)
        if failures:
            raise RegularityViolation(failures)
    return LoadedSystem(sys, region, name, doc)


def load_system(path, spot_check=True):
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SystemFileError(f"invalid JSON: {exc}") from None
    return system_from_dict(doc, spot_check)


def spot_check_regularity(sys, region, n=5, nu=8, tol=1e-9):
    """Check both wedges and the expression domains on an n x n x nu grid."""
    q1 = np.linspace(*region["q1"], n)
    q2 = np.linspace(*region["q2"], n)
    u = sys.control.samples(nu)
    Q1, Q2, U = (a.ravel() for a in np.meshgrid(q1, q2, u, indexing="ij"))
    vj = sys.jets(Q1, Q2, U)
    w1 = vj.f[0] * vj.fu[1] - vj.f[1] * vj.fu[0]
    w2 = vj.fu[0] * vj.fuu[1] - vj.fu[1] * vj.fuu[0]
    failures = []
    for i in range(Q1.size):
        if vj.bad is not None and vj.bad[i]:
            why = [vj.reason]
        else:
            why = []
            if not abs(w1[i]) > tol:
                why.append(f"w1 = f ^ f_u = {w1[i]:.3g}")
            if not abs(w2[i]) > tol:
                why.append(f"w2 = f_u ^ f_uu = {w2[i]:.3g}")
        if why:
            failures.append((Q1[i], Q2[i], U[i], ", ".join(why)))
    return failures


# ---------------------------------------------------------------- tables

CSV_COLUMNS = ("q1", "q2", "u", "c", "b", "kappa", "Lhb", "L2hb", "Lvk", "Lvhb",
               "res_bnk", "res_lemma", "res_bracket", "status")


def _fmt(x):
    return repr(float(x))


def invariant_rows(grid):
    for i in range(grid.q1.size):
        row = {"q1": grid.q1[i], "q2": grid.q2[i], "u": grid.u[i]}
        for k in CSV_COLUMNS[3:-1]:
            row[k] = grid.values[k][i]
        row["status"] = grid.status[i]
        yield row


def invariants_csv(grid):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in invariant_rows(grid):
        w.writerow([_fmt(row[k]) for k in CSV_COLUMNS[:-1]] + [row["status"]])
    return buf.getvalue()


def invariants_json(grid):
    rows = []
    for row in invariant_rows(grid):
        rows.append({k: (row[k] if k == "status" else (float(row[k]) if np.isfinite(row[k]) else None))
                     for k in CSV_COLUMNS})
    return json.dumps({"columns": list(CSV_COLUMNS), "rows": rows}, indent=1) + "\n"
