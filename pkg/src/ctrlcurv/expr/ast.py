"""Expression trees over the variables ``q1``, ``q2``, ``u``; parser and printer.

Grammar (EBNF)::

    expr    = term { ("+" | "-") term } ;
    term    = unary { ("*" | "/") unary } ;
    unary   = ("-" | "+") unary | power ;
    power   = atom [ "^" unary ] ;            (* right associative *)
    atom    = number | "q1" | "q2" | "u" | "pi"
            | func "(" expr ")" | "(" expr ")" ;
    func    = "sin" | "cos" | "tan" | "exp" | "log" | "sqrt" | "atan" ;
    number  = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ] ;

``**`` is accepted as a synonym for ``^``.  ``pi`` parses to a constant.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

VARIABLES = ("q1", "q2", "u")
FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "atan")
BINARY_OPS = ("+", "-", "*", "/", "^")


class ExpressionError(ValueError):
    """Base class for parse and evaluation errors."""


class ExprSyntaxError(ExpressionError):
    def __init__(self, message, offset):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ExprSyntaxError):
    pass


class ArityError(ExprSyntaxError):
    pass


class ExprDomainError(ExpressionError, ArithmeticError):
    """Raised when a subexpression leaves its real domain (log of 0, ...)."""

    def __init__(self, message, subexpression=None):
        if subexpression is not None:
            message = f"{message} in subexpression '{subexpression}'"
        super().__init__(message)
        self.subexpression = subexpression


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" or one of FUNCTIONS
    arg: "Expression"


@dataclass(frozen=True)
class Binary:
    op: str  # one of BINARY_OPS
    left: "Expression"
    right: "Expression"


Expression = Union[Const, Var, Unary, Binary]


# ---------------------------------------------------------------- tokenizer

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<pow>\*\*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


def _byte_offset(text, pos):
    return len(text[:pos].encode("utf-8"))


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", _byte_offset(text, pos))
        kind = m.lastgroup
        if kind != "ws":
            value = "^" if kind == "pow" else m.group()
            tokens.append((kind if kind != "pow" else "op", value, _byte_offset(text, pos)))
        pos = m.end()
    tokens.append(("end", "", _byte_offset(text, len(text))))
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, off = self.take()
        if val != value or kind == "end":
            found = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", off)

    def parse(self):
        node = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {val!r}", off)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.unary())
        return node

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return Unary("neg", self.unary())
        if kind == "op" and val == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return Binary("^", base, self.unary())
        return base

    def atom(self):
        kind, val, off = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "name":
            if val in VARIABLES:
                return Var(val)
            if val == "pi":
                return Const(math.pi)
            if val in FUNCTIONS:
                if self.peek()[1] != "(":
                    raise ExprSyntaxError(f"function {val!r} needs an argument list", self.peek()[2])
                self.take()
                if self.peek()[1] == ")":
                    raise ArityError(f"{val}() takes exactly 1 argument (0 given)", off)
                arg = self.expr()
                nargs = 1
                while self.peek()[1] == ",":
                    self.take()
                    self.expr()
                    nargs += 1
                if nargs != 1:
                    raise ArityError(f"{val}() takes exactly 1 argument ({nargs} given)", off)
                self.expect(")")
                return Unary(val, arg)
            raise UnknownIdentifierError(f"unknown identifier {val!r}", off)
        if val == "(" and kind == "op":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            raise ExprSyntaxError("unexpected end of input", off)
        raise ExprSyntaxError(f"unexpected token {val!r}", off)


def parse(text: str) -> Expression:
    """Parse ``text`` into an expression tree."""
    if not isinstance(text, str):
        raise TypeError(f"expected str, got {type(text).__name__}")
    return _Parser(text).parse()


def as_expression(obj) -> Expression:
    if isinstance(obj, (Const, Var, Unary, Binary)):
        return obj
    if isinstance(obj, (int, float)):
        return Const(float(obj))
    return parse(obj)


# ------------------------------------------------------------------ printer

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}
_ATOM = 5


def _prec(node):
    if isinstance(node, Binary):
        return _PREC[node.op]
    if isinstance(node, Unary) and node.op == "neg":
        return _PREC["neg"]
    return _ATOM


def _fmt_const(value):
    if math.isfinite(value) and value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def to_string(node: Expression) -> str:
    """Print ``node`` with the minimal parentheses needed to re-parse it to the same tree."""

    def wrap(child, min_prec):
        s = to_string(child)
        return f"({s})" if _prec(child) < min_prec else s

    if isinstance(node, Const):
        s = _fmt_const(node.value)
        return f"({s})" if node.value < 0 else s
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Unary):
        if node.op == "neg":
            inner = wrap(node.arg, _PREC["neg"])
            return f"-{inner}" if not inner.startswith("-") else f"-({inner})"
        return f"{node.op}({to_string(node.arg)})"
    p = _PREC[node.op]
    if node.op == "^":
        return f"{wrap(node.left, _ATOM)}^{wrap(node.right, _PREC['neg'])}"
    left = wrap(node.left, p)
    right = wrap(node.right, p + 1)
    return f"{left} {node.op} {right}"


# ---------------------------------------------------------------- utilities

def variables(node: Expression) -> frozenset:
    if isinstance(node, Var):
        return frozenset([node.name])
    if isinstance(node, Const):
        return frozenset()
    if isinstance(node, Unary):
        return variables(node.arg)
    return variables(node.left) | variables(node.right)


def substitute(node: Expression, mapping) -> Expression:
    """Replace variables by expressions (``mapping`` values may be strings or numbers)."""
    mapping = {k: as_expression(v) for k, v in mapping.items()}

    def sub(n):
        if isinstance(n, Var):
            return mapping.get(n.name, n)
        if isinstance(n, Const):
            return n
        if isinstance(n, Unary):
            return Unary(n.op, sub(n.arg))
        return Binary(n.op, sub(n.left), sub(n.right))

    return sub(node)


def count_leaves(node: Expression) -> int:
    if isinstance(node, (Const, Var)):
        return 1
    if isinstance(node, Unary):
        return count_leaves(node.arg)
    return count_leaves(node.left) + count_leaves(node.right)


# small builders used when composing system expressions
def add(a, b):
    return Binary("+", as_expression(a), as_expression(b))


def sub_(a, b):
    return Binary("-", as_expression(a), as_expression(b))


def mul(a, b):
    return Binary("*", as_expression(a), as_expression(b))


def div(a, b):
    return Binary("/", as_expression(a), as_expression(b))


def func(name, a):
    return Unary(name, as_expression(a))
