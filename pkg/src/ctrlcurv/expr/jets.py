"""Forward-mode jets of expressions.

A jet is a truncated multivariate Taylor polynomial in one *primary* variable
``t`` (kept to order 3) and the two remaining variables ``s1, s2`` (kept to
order 1, with the mixed ``s*t`` terms).  Internally we store the eight
Taylor coefficients

    [1, t, t^2, t^3, s1, s2, s1*t, s2*t]

and every operation is exact arithmetic in the quotient ring obtained by
dropping ``t^4``, ``s*t^2`` and ``s_i*s_j``.  Unary functions are composed
through their first three derivatives, which is exact in that ring.

This module is the pure-numpy path; :mod:`ctrlcurv.expr.tape` holds the
compiled kernel with identical arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._accel import numba_enabled
from .ast import Binary, Const, ExprDomainError, Unary, Var, VARIABLES, to_string

NSLOT = 8


@dataclass(frozen=True)
class Jet:
    """Value and partial derivatives of a scalar expression at a point (primary variable ``u``)."""

    value: float
    du: float
    duu: float
    duuu: float
    dq1: float
    dq2: float
    dq1_du: float
    dq2_du: float

    def __add__(self, other):
        return Jet(*(a + b for a, b in zip(self.astuple(), other.astuple())))

    def astuple(self):
        return (self.value, self.du, self.duu, self.duuu, self.dq1, self.dq2, self.dq1_du, self.dq2_du)


def seed_slots(primary):
    """Map variable name -> coefficient slot (1 for the primary variable, 4/5 for the others)."""
    others = [v for v in VARIABLES if v != primary]
    return {primary: 1, others[0]: 4, others[1]: 5}


def taylor_to_derivatives(c):
    out = np.array(c, dtype=float, copy=True)
    out[2] *= 2.0
    out[3] *= 6.0
    return out


# ------------------------------------------------------------ ring arithmetic

def _mul(a, b):
    r = np.empty(np.broadcast_shapes(a.shape, b.shape))
    r[0] = a[0] * b[0]
    r[1] = a[0] * b[1] + a[1] * b[0]
    r[2] = a[0] * b[2] + a[1] * b[1] + a[2] * b[0]
    r[3] = a[0] * b[3] + a[1] * b[2] + a[2] * b[1] + a[3] * b[0]
    r[4] = a[0] * b[4] + a[4] * b[0]
    r[5] = a[0] * b[5] + a[5] * b[0]
    r[6] = a[0] * b[6] + a[1] * b[4] + a[4] * b[1] + a[6] * b[0]
    r[7] = a[0] * b[7] + a[1] * b[5] + a[5] * b[1] + a[7] * b[0]
    return r


def _compose(g0, g1, g2, g3, a):
    """g(a) from the derivatives g0..g3 of g at the value a[0]."""
    d1, d2, d3 = a[1], a[2], a[3]
    r = np.empty_like(a)
    r[0] = g0
    r[1] = g1 * d1
    r[2] = g1 * d2 + 0.5 * g2 * d1 * d1
    r[3] = g1 * d3 + g2 * d1 * d2 + g3 * d1 * d1 * d1 / 6.0
    r[4] = g1 * a[4]
    r[5] = g1 * a[5]
    r[6] = g1 * a[6] + g2 * d1 * a[4]
    r[7] = g1 * a[7] + g2 * d1 * a[5]
    return r


def _powc_derivs(x, p):
    """x**p and its first three derivatives for a constant exponent p."""
    integer = float(p).is_integer()
    out = []
    coef = 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        for k in range(4):
            if coef == 0.0:
                out.append(np.zeros_like(x))
            elif integer and p - k >= 0:
                out.append(coef * x ** int(p - k))
            else:
                out.append(coef * np.power(x, p - k))
            coef *= p - k
    return out


class _Evaluator:
    def __init__(self, seeds, strict):
        self.seeds = seeds  # name -> coefficient array
        self.strict = strict
        self.bad = None
        self.bad_where = None

    def flag(self, mask, node, message):
        mask = np.asarray(mask)
        if not mask.any():
            return
        if self.strict:
            raise ExprDomainError(message, to_string(node))
        self.bad = mask if self.bad is None else (self.bad | mask)
        if self.bad_where is None:
            self.bad_where = f"{message} in '{to_string(node)}'"

    def ev(self, node):
        if isinstance(node, Const):
            shape = next(iter(self.seeds.values())).shape
            r = np.zeros(shape)
            r[0] = node.value
            return r
        if isinstance(node, Var):
            return self.seeds[node.name]
        if isinstance(node, Unary):
            a = self.ev(node.arg)
            return self.unary(node, a)
        if node.op == "^":
            base = self.ev(node.left)
            p = _constant_value(node.right)
            if p is not None:
                x = base[0]
                if not float(p).is_integer():
                    self.flag(x <= 0, node, "non-integer power of non-positive base")
                elif p < 0:
                    self.flag(x == 0, node, "negative power of zero")
                g = _powc_derivs(x, p)
                return _compose(*g, base)
            expo = self.ev(node.right)
            x = base[0]
            self.flag(x <= 0, node, "variable power of non-positive base")
            with np.errstate(divide="ignore", invalid="ignore"):
                lx = np.log(x)
                inv = 1.0 / x
            la = _compose(lx, inv, -inv * inv, 2 * inv ** 3, base)
            m = _mul(expo, la)
            e = np.exp(m[0])
            return _compose(e, e, e, e, m)
        a = self.ev(node.left)
        b = self.ev(node.right)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return _mul(a, b)
        # division
        x = b[0]
        self.flag(x == 0, node, "division by zero")
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / x
        rb = _compose(inv, -inv * inv, 2 * inv ** 3, -6 * inv ** 4, b)
        return _mul(a, rb)

    def unary(self, node, a):
        x = a[0]
        op = node.op
        if op == "neg":
            return -a
        if op == "sin":
            s, c = np.sin(x), np.cos(x)
            return _compose(s, c, -s, -c, a)
        if op == "cos":
            s, c = np.sin(x), np.cos(x)
            return _compose(c, -s, -c, s, a)
        if op == "tan":
            t = np.tan(x)
            sec2 = 1 + t * t
            return _compose(t, sec2, 2 * t * sec2, sec2 * (2 + 6 * t * t), a)
        if op == "exp":
            e = np.exp(x)
            return _compose(e, e, e, e, a)
        if op == "log":
            self.flag(x <= 0, node, "log of non-positive value")
            with np.errstate(divide="ignore", invalid="ignore"):
                inv = 1.0 / x
                return _compose(np.log(x), inv, -inv * inv, 2 * inv ** 3, a)
        if op == "sqrt":
            self.flag(x <= 0, node, "sqrt of non-positive value")
            with np.errstate(divide="ignore", invalid="ignore"):
                r = np.sqrt(x)
                return _compose(r, 0.5 / r, -0.25 / (r * x), 0.375 / (r * x * x), a)
        if op == "atan":
            w = 1.0 / (1 + x * x)
            return _compose(np.arctan(x), w, -2 * x * w * w, (6 * x * x - 2) * w ** 3, a)
        raise ValueError(f"unknown function {op!r}")


def _constant_value(node):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Unary) and node.op == "neg":
        v = _constant_value(node.arg)
        return None if v is None else -v
    return None


def numpy_coefficients(expr, q1, q2, u, primary="u", strict=True):
    """Pure-numpy jet evaluation; returns (taylor coefficients (8, *shape), bad mask or None, reason)."""
    q1, q2, u = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (q1, q2, u)))
    shape = q1.shape
    slots = seed_slots(primary)
    seeds = {}
    for name, val in zip(VARIABLES, (q1, q2, u)):
        c = np.zeros((NSLOT,) + shape)
        c[0] = val
        c[slots[name]] = 1.0
        seeds[name] = c
    ev = _Evaluator(seeds, strict)
    with np.errstate(invalid="ignore", over="ignore"):
        coeffs = ev.ev(expr)
    coeffs = np.broadcast_to(coeffs, (NSLOT,) + shape).copy()
    if ev.bad is not None:
        coeffs[:, ev.bad] = np.nan
    return coeffs, ev.bad, ev.bad_where


def jet_array(expr, q1, q2, u, primary="u", strict=True):
    """Derivative slots ``[value, d1, d2, d3, ds1, ds2, ds1_d1, ds2_d1]`` stacked on axis 0.

    ``d*`` are derivatives in the primary variable, ``s1, s2`` the other two
    variables in (q1, q2, u) order.  With ``strict=False`` points leaving the
    expression's domain come back as NaN and are reported in the mask.
    """
    if numba_enabled():
        from .tape import tape_coefficients

        coeffs, bad, where = tape_coefficients(expr, q1, q2, u, primary, strict)
    else:
        coeffs, bad, where = numpy_coefficients(expr, q1, q2, u, primary, strict)
    return taylor_to_derivatives(coeffs), bad, where


def eval_jet(expr, q1, q2, u) -> Jet:
    """Value and derivative slots of ``expr`` at (q1, q2, u); raises ExprDomainError."""
    d, _, _ = jet_array(expr, q1, q2, u, "u", strict=True)
    if d.ndim == 1:
        d = [float(x) for x in d]
    return Jet(d[0], d[1], d[2], d[3], d[4], d[5], d[6], d[7])
