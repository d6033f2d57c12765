"""Compiled jet evaluation.

An expression is flattened to postfix instructions ``(opcode, arg)`` and a
constant table; :func:`_run_tape` interprets that tape point by point with a
small stack of 8-slot jets.  Same ring arithmetic as :mod:`.jets`.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .._accel import maybe_njit
from .ast import Binary, Const, ExprDomainError, Unary, Var, VARIABLES, to_string

OP_CONST, OP_VAR, OP_NEG, OP_ADD, OP_SUB, OP_MUL, OP_DIV, OP_POW, OP_POWC = range(9)
OP_SIN, OP_COS, OP_TAN, OP_EXP, OP_LOG, OP_SQRT, OP_ATAN = range(10, 17)

_FUNC_OPS = {"sin": OP_SIN, "cos": OP_COS, "tan": OP_TAN, "exp": OP_EXP,
             "log": OP_LOG, "sqrt": OP_SQRT, "atan": OP_ATAN}
_BIN_OPS = {"+": OP_ADD, "-": OP_SUB, "*": OP_MUL, "/": OP_DIV}


class Tape:
    __slots__ = ("code", "consts", "depth", "nodes")

    def __init__(self, code, consts, depth, nodes):
        self.code = code
        self.consts = consts
        self.depth = depth
        self.nodes = nodes  # instruction index -> subexpression (for error messages)


def _const_exponent(node):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Unary) and node.op == "neg":
        v = _const_exponent(node.arg)
        return None if v is None else -v
    return None


@lru_cache(maxsize=256)
def compile_tape(expr) -> Tape:
    code, consts, nodes = [], [], []
    depth = [0, 0]

    def push(n=1):
        depth[0] += n
        depth[1] = max(depth[1], depth[0])

    def emit(op, arg, node):
        code.append((op, arg))
        nodes.append(node)

    def walk(n):
        if isinstance(n, Const):
            consts.append(n.value)
            emit(OP_CONST, len(consts) - 1, n)
            push()
        elif isinstance(n, Var):
            emit(OP_VAR, VARIABLES.index(n.name), n)
            push()
        elif isinstance(n, Unary):
            walk(n.arg)
            emit(OP_NEG if n.op == "neg" else _FUNC_OPS[n.op], 0, n)
        elif n.op == "^" and _const_exponent(n.right) is not None:
            walk(n.left)
            consts.append(_const_exponent(n.right))
            emit(OP_POWC, len(consts) - 1, n)
        else:
            walk(n.left)
            walk(n.right)
            emit(OP_POW if n.op == "^" else _BIN_OPS[n.op], 0, n)
            depth[0] -= 1

    walk(expr)
    return Tape(np.array(code, dtype=np.int64).reshape(-1, 2),
                np.array(consts + [0.0], dtype=np.float64), max(depth[1], 1), nodes)


@maybe_njit
def _mul_into(a, b, r):
    r0 = a[0] * b[0]
    r1 = a[0] * b[1] + a[1] * b[0]
    r2 = a[0] * b[2] + a[1] * b[1] + a[2] * b[0]
    r3 = a[0] * b[3] + a[1] * b[2] + a[2] * b[1] + a[3] * b[0]
    r4 = a[0] * b[4] + a[4] * b[0]
    r5 = a[0] * b[5] + a[5] * b[0]
    r6 = a[0] * b[6] + a[1] * b[4] + a[4] * b[1] + a[6] * b[0]
    r7 = a[0] * b[7] + a[1] * b[5] + a[5] * b[1] + a[7] * b[0]
    r[0] = r0
    r[1] = r1
    r[2] = r2
    r[3] = r3
    r[4] = r4
    r[5] = r5
    r[6] = r6
    r[7] = r7


@maybe_njit
def _compose_into(g0, g1, g2, g3, a):
    d1 = a[1]
    d2 = a[2]
    d3 = a[3]
    r6 = g1 * a[6] + g2 * d1 * a[4]
    r7 = g1 * a[7] + g2 * d1 * a[5]
    a[0] = g0
    a[3] = g1 * d3 + g2 * d1 * d2 + g3 * d1 * d1 * d1 / 6.0
    a[2] = g1 * d2 + 0.5 * g2 * d1 * d1
    a[1] = g1 * d1
    a[4] = g1 * a[4]
    a[5] = g1 * a[5]
    a[6] = r6
    a[7] = r7


@maybe_njit
def _powc(x, p, k):
    coef = 1.0
    for j in range(k):
        coef *= p - j
    if coef == 0.0:
        return 0.0
    e = p - k
    if e == np.floor(e) and e >= 0:
        return coef * x ** int(e)
    return coef * x ** e


@maybe_njit
def eval_point(code, consts, stack, slots, x0, x1, x2, res):
    """Evaluate one tape at one point into ``res`` (8 Taylor slots).

    Returns -1 on success or the index of the failing instruction.
    """
    sp = 0
    coords = (x0, x1, x2)
    for k in range(code.shape[0]):
        op = code[k, 0]
        arg = code[k, 1]
        if op == OP_CONST:
            for j in range(8):
                stack[sp, j] = 0.0
            stack[sp, 0] = consts[arg]
            sp += 1
        elif op == OP_VAR:
            for j in range(8):
                stack[sp, j] = 0.0
            stack[sp, 0] = coords[arg]
            stack[sp, slots[arg]] = 1.0
            sp += 1
        elif op == OP_NEG:
            for j in range(8):
                stack[sp - 1, j] = -stack[sp - 1, j]
        elif op == OP_ADD:
            for j in range(8):
                stack[sp - 2, j] += stack[sp - 1, j]
            sp -= 1
        elif op == OP_SUB:
            for j in range(8):
                stack[sp - 2, j] -= stack[sp - 1, j]
            sp -= 1
        elif op == OP_MUL:
            _mul_into(stack[sp - 2], stack[sp - 1], stack[sp - 2])
            sp -= 1
        elif op == OP_DIV:
            b = stack[sp - 1]
            x = b[0]
            if x == 0.0:
                return k
            inv = 1.0 / x
            _compose_into(inv, -inv * inv, 2.0 * inv ** 3, -6.0 * inv ** 4, b)
            _mul_into(stack[sp - 2], b, stack[sp - 2])
            sp -= 1
        elif op == OP_POW:
            a = stack[sp - 2]
            x = a[0]
            if x <= 0.0:
                return k
            inv = 1.0 / x
            _compose_into(np.log(x), inv, -inv * inv, 2.0 * inv ** 3, a)
            _mul_into(stack[sp - 1], a, a)
            e = np.exp(a[0])
            _compose_into(e, e, e, e, a)
            sp -= 1
        elif op == OP_POWC:
            a = stack[sp - 1]
            x = a[0]
            p = consts[arg]
            if p != np.floor(p):
                if x <= 0.0:
                    return k
            elif p < 0 and x == 0.0:
                return k
            _compose_into(_powc(x, p, 0), _powc(x, p, 1), _powc(x, p, 2), _powc(x, p, 3), a)
        else:
            a = stack[sp - 1]
            x = a[0]
            if op == OP_SIN:
                s = np.sin(x)
                c = np.cos(x)
                _compose_into(s, c, -s, -c, a)
            elif op == OP_COS:
                s = np.sin(x)
                c = np.cos(x)
                _compose_into(c, -s, -c, s, a)
            elif op == OP_TAN:
                t = np.tan(x)
                sec2 = 1.0 + t * t
                _compose_into(t, sec2, 2.0 * t * sec2, sec2 * (2.0 + 6.0 * t * t), a)
            elif op == OP_EXP:
                e = np.exp(x)
                _compose_into(e, e, e, e, a)
            elif op == OP_LOG:
                if x <= 0.0:
                    return k
                inv = 1.0 / x
                _compose_into(np.log(x), inv, -inv * inv, 2.0 * inv ** 3, a)
            elif op == OP_SQRT:
                if x <= 0.0:
                    return k
                r = np.sqrt(x)
                _compose_into(r, 0.5 / r, -0.25 / (r * x), 0.375 / (r * x * x), a)
            else:  # OP_ATAN
                w = 1.0 / (1.0 + x * x)
                _compose_into(np.arctan(x), w, -2.0 * x * w * w, (6.0 * x * x - 2.0) * w ** 3, a)
    for j in range(8):
        res[j] = stack[0, j]
    return -1


@maybe_njit
def _run_tape(code, consts, depth, slots, q1, q2, u, out, err):
    stack = np.empty((depth, 8))
    res = np.empty(8)
    for i in range(q1.shape[0]):
        failed = eval_point(code, consts, stack, slots, q1[i], q2[i], u[i], res)
        if failed >= 0:
            err[i] = failed + 1
            for j in range(8):
                out[j, i] = np.nan
        else:
            err[i] = 0
            for j in range(8):
                out[j, i] = res[j]


_MESSAGES = {
    OP_DIV: "division by zero",
    OP_POW: "variable power of non-positive base",
    OP_POWC: "power outside real domain",
    OP_LOG: "log of non-positive value",
    OP_SQRT: "sqrt of non-positive value",
}


def tape_coefficients(expr, q1, q2, u, primary="u", strict=True):
    """Compiled counterpart of :func:`ctrlcurv.expr.jets.numpy_coefficients`."""
    tape = compile_tape(expr)
    q1, q2, u = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (q1, q2, u)))
    shape = q1.shape
    others = [v for v in VARIABLES if v != primary]
    slots = np.array([1 if v == primary else 4 + others.index(v) for v in VARIABLES], dtype=np.int64)
    flat = [np.array(a, dtype=np.float64).reshape(-1) for a in (q1, q2, u)]
    n = flat[0].shape[0]
    out = np.empty((8, n))
    err = np.zeros(n, dtype=np.int64)
    _run_tape(tape.code, tape.consts, tape.depth, slots, flat[0], flat[1], flat[2], out, err)
    bad = None
    where = None
    if err.any():
        first = int(err[err > 0][0]) - 1
        node = tape.nodes[first]
        message = _MESSAGES.get(int(tape.code[first, 0]), "domain error")
        if strict:
            raise ExprDomainError(message, to_string(node))
        bad = (err > 0).reshape(shape)
        where = f"{message} in '{to_string(node)}'"
    return out.reshape((8,) + shape), bad, where
