"""Arithmetic expressions over ``t, z0, w0, z1, w1``.

Small Pratt parser, canonical printer and a compiler to vectorised numpy
callables. Grammar, loosest to tightest::

    expr   := expr ('+' | '-') expr
            | expr ('*' | '/') expr
            | '-' expr
            | expr '^' int-const          (right associative)
            | NUMBER | VAR | FUNC '(' expr ')' | '(' expr ')'

Unary minus binds looser than ``^`` so ``-2^2`` is ``-4``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

VARIABLES = ("t", "z0", "w0", "z1", "w1")

FUNCTIONS = {
    "sin": "sin",
    "cos": "cos",
    "tan": "tan",
    "exp": "exp",
    "tanh": "tanh",
    "atan": "arctan",
    "abs": "abs",
    "sqrt": "sqrt",
}

CONSTANTS = {"pi": math.pi}

# binding powers
_ADD, _MUL, _NEG, _POW = 10, 20, 30, 40


class ExpressionError(ValueError):
    """Raised for malformed expressions. ``offset`` is a byte offset into the source."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)


# --- AST -------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Var, Neg, BinOp, Pow, Call]


# --- tokenizer -------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # 'num', 'name', 'op', 'end'
    text: str
    offset: int


def tokenize(src: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise ExpressionError(f"unexpected character {src[pos]!r}", _byte_offset(src, pos))
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), _byte_offset(src, pos)))
        pos = m.end()
    toks.append(_Tok("end", "", _byte_offset(src, len(src))))
    return toks


def _byte_offset(src: str, pos: int) -> int:
    return len(src[:pos].encode("utf-8"))


# --- parser ----------------------------------------------------------------

_INFIX = {"+": _ADD, "-": _ADD, "*": _MUL, "/": _MUL, "^": _POW}


class _Parser:
    def __init__(self, src: str):
        self.toks = tokenize(src)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> _Tok:
        tok = self.next()
        if tok.text != text or tok.kind != "op":
            found = "end of input" if tok.kind == "end" else repr(tok.text)
            raise ExpressionError(f"expected {text!r}, found {found}", tok.offset)
        return tok

    def parse(self) -> Node:
        node = self.expression(0)
        tok = self.peek()
        if tok.kind != "end":
            raise ExpressionError(f"unexpected token {tok.text!r}", tok.offset)
        return node

    def expression(self, min_bp: int) -> Node:
        left = self.prefix()
        while True:
            tok = self.peek()
            if tok.kind != "op" or tok.text not in _INFIX:
                return left
            bp = _INFIX[tok.text]
            if bp <= min_bp:
                return left
            self.next()
            if tok.text == "^":
                # right associative; exponent may carry a unary minus
                exp_node = self.expression(_NEG - 1)
                left = Pow(left, _integer_exponent(exp_node, tok.offset))
            else:
                right = self.expression(bp)
                left = BinOp(tok.text, left, right)

    def prefix(self) -> Node:
        tok = self.next()
        if tok.kind == "num":
            return Num(float(tok.text))
        if tok.kind == "name":
            return self.name(tok)
        if tok.kind == "op" and tok.text == "-":
            return Neg(self.expression(_NEG))
        if tok.kind == "op" and tok.text == "(":
            node = self.expression(0)
            self.expect(")")
            return node
        if tok.kind == "end":
            raise ExpressionError("unexpected end of input", tok.offset)
        raise ExpressionError(f"unexpected token {tok.text!r}", tok.offset)

    def name(self, tok: _Tok) -> Node:
        name = tok.text
        if name in VARIABLES:
            return Var(name)
        if name in CONSTANTS:
            return Num(CONSTANTS[name])
        if name in FUNCTIONS:
            self.expect("(")
            if self.peek().text == ")":
                raise ExpressionError(f"{name}() takes exactly 1 argument, got 0", tok.offset)
            arg = self.expression(0)
            nxt = self.peek()
            if nxt.kind == "op" and nxt.text == ",":
                raise ExpressionError(f"{name}() takes exactly 1 argument", tok.offset)
            self.expect(")")
            return Call(name, arg)
        raise ExpressionError(f"unknown identifier {name!r}", tok.offset)


def _integer_exponent(node: Node, offset: int) -> int:
    if _has_vars(node):
        raise ExpressionError("exponent must be an integer constant", offset)
    with np.errstate(all="ignore"):
        value = float(compile_expr(node)(0.0, 0.0, 0.0, 0.0, 0.0))
    if not math.isfinite(value) or value != int(value):
        raise ExpressionError("exponent must be an integer constant", offset)
    return int(value)


def _has_vars(node: Node) -> bool:
    if isinstance(node, Var):
        return True
    if isinstance(node, Num):
        return False
    if isinstance(node, Neg):
        return _has_vars(node.operand)
    if isinstance(node, BinOp):
        return _has_vars(node.left) or _has_vars(node.right)
    if isinstance(node, Pow):
        return _has_vars(node.base)
    return _has_vars(node.arg)


def parse_expression(src: str) -> Node:
    """Parse ``src`` into an AST. Raises :class:`ExpressionError`."""
    if not isinstance(src, str):
        raise TypeError("expression source must be a string")
    return _Parser(src).parse()


# --- printer ---------------------------------------------------------------


def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _INFIX[node.op]
    if isinstance(node, Neg):
        return _NEG
    if isinstance(node, Pow):
        return _POW
    if isinstance(node, Num) and node.value < 0:
        return _NEG
    return 100


def _fmt_num(value: float) -> str:
    if not math.isfinite(value):
        raise ValueError(f"cannot print non-finite literal {value!r}")
    if value < 0:
        return "-" + _fmt_num(-value)
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def to_source(node: Node) -> str:
    """Canonical text with the fewest parentheses that preserve the tree."""
    if isinstance(node, Num):
        return _fmt_num(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    if isinstance(node, Neg):
        inner = to_source(node.operand)
        if _prec(node.operand) < _NEG:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, Pow):
        base = to_source(node.base)
        if _prec(node.base) <= _POW:
            base = f"({base})"
        exp = str(node.exponent) if node.exponent >= 0 else f"({node.exponent})"
        return f"{base}^{exp}"
    prec = _INFIX[node.op]
    left = to_source(node.left)
    right = to_source(node.right)
    if _prec(node.left) < prec:
        left = f"({left})"
    if _prec(node.right) <= prec:
        right = f"({right})"
    return f"{left} {node.op} {right}"


# --- compilation -----------------------------------------------------------


def _py(node: Node) -> str:
    if isinstance(node, Num):
        return f"({node.value!r})"
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"_np.{FUNCTIONS[node.func]}({_py(node.arg)})"
    if isinstance(node, Neg):
        return f"(-{_py(node.operand)})"
    if isinstance(node, Pow):
        return f"({_py(node.base)} ** {node.exponent})"
    return f"({_py(node.left)} {node.op} {_py(node.right)})"


def compile_expr(node: Node) -> Callable:
    """Compile an AST to ``fn(t, z0, w0, z1, w1)`` operating on numpy arrays.

    Inputs are promoted to float64 so division by zero and overflow produce
    inf/nan instead of raising; callers decide what is an error.
    """
    body = _py(node)
    code = (
        "def _rhs(t, z0, w0, z1, w1):\n"
        "    t, z0, w0, z1, w1 = (_f64(t), _f64(z0), _f64(w0), _f64(z1), _f64(w1))\n"
        f"    return _bc({body}, t, z0, w0, z1, w1)\n"
    )
    ns = {"_np": np, "_f64": _as_float, "_bc": _broadcast}
    exec(compile(code, "<perisolve-expr>", "exec"), ns)
    return ns["_rhs"]


def _as_float(x):
    return np.asarray(x, dtype=np.float64)[()]


def _broadcast(res, *args):
    shape = np.broadcast_shapes(*(np.shape(a) for a in args))
    if np.shape(res) != shape:
        res = np.broadcast_to(res, shape).copy()
    return res


class Expression:
    """Parsed expression bundled with its compiled evaluator."""

    def __init__(self, source: str | Node):
        self.ast = parse_expression(source) if isinstance(source, str) else source
        self.source = to_source(self.ast)
        self._fn = compile_expr(self.ast)

    def __call__(self, t, z0, w0, z1, w1):
        with np.errstate(all="ignore"):
            return self._fn(t, z0, w0, z1, w1)

    def __repr__(self):
        return f"Expression({self.source!r})"

    def __eq__(self, other):
        return isinstance(other, Expression) and other.ast == self.ast

    def __hash__(self):
        return hash(self.ast)
