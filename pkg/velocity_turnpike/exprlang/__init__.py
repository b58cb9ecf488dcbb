"""
Arithmetic expression language used by scenario files to define f(v, u) and
the stage cost, with forward-mode derivatives.
"""

from .parser import (
    FUNCTIONS,
    BinOp,
    Call,
    Expr,
    Neg,
    Num,
    Var,
    parse,
    to_source,
    tokenize,
)
from .dual import Dual
from .evaluate import eval_with_gradient, evaluate, hessian_fd

__all__ = [
    "FUNCTIONS",
    "BinOp",
    "Call",
    "Expr",
    "Neg",
    "Num",
    "Var",
    "parse",
    "to_source",
    "tokenize",
    "Dual",
    "eval_with_gradient",
    "evaluate",
    "hessian_fd",
]
