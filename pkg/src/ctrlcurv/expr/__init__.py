"""Scalar expressions in (q1, q2, u): parsing, printing and forward-mode jets."""

from .ast import (
    ArityError,
    Binary,
    Const,
    Expression,
    ExprDomainError,
    ExpressionError,
    ExprSyntaxError,
    UnknownIdentifierError,
    Unary,
    Var,
    as_expression,
    count_leaves,
    parse,
    substitute,
    to_string,
    variables,
)
from .jets import Jet, eval_jet, jet_array

__all__ = [
    "ArityError", "Binary", "Const", "Expression", "ExprDomainError", "ExpressionError",
    "ExprSyntaxError", "Jet", "UnknownIdentifierError", "Unary", "Var", "as_expression",
    "count_leaves", "eval_jet", "jet_array", "parse", "substitute", "to_string", "variables",
]
