"""
Expression language for scenario files.

Grammar (lowest to highest precedence):

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := primary ('^' unary)?          # right-associative
    primary := NUMBER | ('v' | 'u') '[' INT ']' | FUNC '(' expr ')' | '(' expr ')'

FUNC is one of sin, cos, exp, sinh, cosh, tanh, abs. Only velocity and input
components are addressable, so every parsed expression is independent of the
configuration q.
"""

import re
import logging
from dataclasses import dataclass
from typing import List, Optional, Union

from ..errors import ExprSyntaxError, UnknownIdentifierError

logger = logging.getLogger(__name__)

FUNCTIONS = ("sin", "cos", "exp", "sinh", "cosh", "tanh", "abs")
VARIABLES = ("v", "u")


# ---------------------------------------------------------------------------
# Syntax tree
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str  # "v" or "u"
    index: int


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Var, Neg, BinOp, Call]


def to_source(e: Expr) -> str:
    """Print an expression so that parse(to_source(e)) == e."""
    if isinstance(e, Num):
        return repr(float(e.value))
    if isinstance(e, Var):
        return f"{e.name}[{e.index}]"
    if isinstance(e, Neg):
        return f"(-{to_source(e.operand)})"
    if isinstance(e, BinOp):
        return f"({to_source(e.left)} {e.op} {to_source(e.right)})"
    if isinstance(e, Call):
        return f"{e.func}({to_source(e.arg)})"
    raise TypeError(f"Not an expression node: {e!r}")


def max_index(e: Expr, name: str) -> int:
    """Largest index of variable `name` used in e, or -1."""
    if isinstance(e, Var):
        return e.index if e.name == name else -1
    if isinstance(e, Neg):
        return max_index(e.operand, name)
    if isinstance(e, BinOp):
        return max(max_index(e.left, name), max_index(e.right, name))
    if isinstance(e, Call):
        return max_index(e.arg, name)
    return -1


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r]+)"
    r"|(?P<nl>\n)"
    r"|(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()\[\]])"
)


@dataclass(frozen=True)
class Token:
    kind: str  # num, ident, op, eof
    text: str
    line: int
    column: int


def tokenize(source: str) -> List[Token]:
    tokens: List[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        match = _TOKEN_RE.match(source, pos)
        if match is None:
            raise ExprSyntaxError(
                f"Unexpected character {source[pos]!r}", line, pos - line_start + 1
            )
        kind = match.lastgroup
        if kind == "nl":
            line += 1
            line_start = match.end()
        elif kind != "ws":
            tokens.append(Token(kind, match.group(), line, pos - line_start + 1))
        pos = match.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, tokens: List[Token], n_v: Optional[int], n_u: Optional[int]):
        self.tokens = tokens
        self.pos = 0
        self.dims = {"v": n_v, "u": n_u}

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text: str) -> Token:
        tok = self.peek()
        if tok.text != text or tok.kind == "eof":
            found = "end of input" if tok.kind == "eof" else repr(tok.text)
            raise ExprSyntaxError(f"Expected '{text}', found {found}", tok.line, tok.column)
        return self.advance()

    def valid_names(self) -> List[str]:
        names: List[str] = []
        for var in VARIABLES:
            dim = self.dims[var]
            if dim is None:
                names.append(f"{var}[i]")
            else:
                names.extend(f"{var}[{i}]" for i in range(dim))
        return names + [f"{f}(...)" for f in FUNCTIONS]

    def parse(self) -> Expr:
        if self.peek().kind == "eof":
            tok = self.peek()
            raise ExprSyntaxError("Empty expression", tok.line, tok.column)
        node = self.expr()
        tok = self.peek()
        if tok.kind != "eof":
            raise ExprSyntaxError(f"Unexpected token {tok.text!r}", tok.line, tok.column)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            return Neg(self.unary())
        if tok.kind == "op" and tok.text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self.peek().kind == "op" and self.peek().text == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def primary(self) -> Expr:
        tok = self.advance()
        if tok.kind == "num":
            return Num(float(tok.text))
        if tok.kind == "ident":
            if tok.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(tok.text, arg)
            if tok.text in VARIABLES:
                return self.variable(tok)
            raise UnknownIdentifierError(tok.text, self.valid_names(), tok.line, tok.column)
        if tok.kind == "op" and tok.text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise ExprSyntaxError(f"Expected a number, variable or '(' but found {found}", tok.line, tok.column)

    def variable(self, name_tok: Token) -> Var:
        self.expect("[")
        idx_tok = self.advance()
        if idx_tok.kind != "num" or not idx_tok.text.isdigit():
            raise ExprSyntaxError(
                f"Index of {name_tok.text} must be a non-negative integer", idx_tok.line, idx_tok.column
            )
        self.expect("]")
        index = int(idx_tok.text)
        dim = self.dims[name_tok.text]
        if dim is not None and index >= dim:
            raise UnknownIdentifierError(
                f"{name_tok.text}[{index}]", self.valid_names(), name_tok.line, name_tok.column
            )
        return Var(name_tok.text, index)


def parse(source: str, n_v: Optional[int] = None, n_u: Optional[int] = None) -> Expr:
    """Parse `source` into a syntax tree.

    When n_v / n_u are given, indices are checked against them.
    """
    if source is None or not source.strip():
        raise ExprSyntaxError("Empty expression", 1, 1)
    return _Parser(tokenize(source), n_v, n_u).parse()
