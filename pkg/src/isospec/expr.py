"""Single-variable real expressions: parsing, evaluation, symbolic derivatives.

Grammar (whitespace is ignored, ``-`` may also be written as U+2212)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | power
    power  := atom ('^' unary)?
    atom   := number | variable | funcname '(' expr ')' | '(' expr ')'

so ``^`` binds tighter than unary minus (``-x^2 == -(x^2)``) and is
right-associative (``2^3^2 == 2^9``).  Builtin functions are ``sin``, ``cos``,
``tan``, ``exp``, ``ln``, ``sqrt``, ``abs`` and ``sign``; the last one exists
because ``d/dx abs(g) = sign(g) * g'``, with ``sign(0) = 0``.

Evaluation accepts a float or a numpy array and never returns NaN or inf:
anything outside the real domain raises :class:`~isospec.errors.DomainError`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DomainError, ParseError, UnknownIdentifierError

__all__ = [
    "Expression",
    "Num",
    "Var",
    "BinOp",
    "Neg",
    "Call",
    "parse",
    "evaluate",
    "differentiate",
    "render",
    "FUNCTIONS",
]


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Var, BinOp, Neg, Call]

FUNCTIONS = ("sin", "cos", "tan", "exp", "ln", "sqrt", "abs", "sign")

ZERO = Num(0.0)
ONE = Num(1.0)


# --------------------------------------------------------------------------
# tokenizer / parser

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()−])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # num, name, op, end
    text: str
    offset: int  # byte offset


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(
                f"unexpected character {source[pos]!r}", source, _byte_offset(source, pos)
            )
        kind = m.lastgroup
        if kind != "ws":
            text = m.group()
            if text == "−":
                text = "-"
            tokens.append(_Token(kind, text, _byte_offset(source, pos)))
        pos = m.end()
    tokens.append(_Token("end", "", len(source.encode("utf-8"))))
    return tokens


def _byte_offset(source: str, index: int) -> int:
    return len(source[:index].encode("utf-8"))


class _Parser:
    def __init__(self, source: str, variable: str):
        self.source = source
        self.variable = variable
        self.tokens = _tokenize(source)
        self.i = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def fail(self, message: str, tok: _Token | None = None):
        tok = tok or self.tok
        raise ParseError(message, self.source, tok.offset)

    def accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str):
        if not self.accept(text):
            found = self.tok.text or "end of input"
            self.fail(f"expected {text!r}, found {found!r}")

    def parse(self) -> Node:
        if self.tok.kind == "end":
            self.fail("empty expression")
        node = self.expr()
        if self.tok.kind != "end":
            self.fail(f"unexpected {self.tok.text!r}")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.accept("-"):
            return Neg(self.unary())
        if self.accept("+"):
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.accept("^"):
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Node:
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Num(float(tok.text))
        if tok.kind == "name":
            self.i += 1
            if tok.text in FUNCTIONS:
                if not (self.tok.kind == "op" and self.tok.text == "("):
                    self.fail(f"function {tok.text!r} requires parentheses")
                self.i += 1
                arg = self.expr()
                self.expect(")")
                return Call(tok.text, arg)
            if tok.text == self.variable:
                return Var(tok.text)
            raise UnknownIdentifierError(
                f"unknown identifier {tok.text!r} (variable is {self.variable!r})",
                self.source,
                tok.offset,
            )
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        found = tok.text or "end of input"
        self.fail(f"unexpected {found!r}")


# --------------------------------------------------------------------------
# evaluation


def _first_bad(x, mask) -> float | None:
    if np.ndim(mask) == 0:
        return float(x) if np.ndim(x) == 0 else None
    xb = np.broadcast_to(x, np.shape(mask))[mask]
    return float(xb.flat[0]) if xb.size else None


def _check(value, x, what: str):
    finite = np.isfinite(value)
    if not np.all(finite):
        raise DomainError(f"{what} is not a finite real", _first_bad(x, ~finite))
    return value


def _eval(node: Node, x):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return x
    if isinstance(node, Neg):
        return -_eval(node.arg, x)
    if isinstance(node, BinOp):
        a = _eval(node.left, x)
        b = _eval(node.right, x)
        op = node.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return _check(np.multiply(a, b), x, "product")
        if op == "/":
            zero = np.asarray(b) == 0
            if np.any(zero):
                raise DomainError("division by zero", _first_bad(x, zero))
            return _check(np.divide(a, b), x, "quotient")
        # power
        a_arr, b_arr = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
        bad = (a_arr < 0) & (b_arr != np.round(b_arr))
        if np.any(bad):
            raise DomainError("negative base with non-integer exponent", _first_bad(x, bad))
        bad = (a_arr == 0) & (b_arr < 0)
        if np.any(bad):
            raise DomainError("zero raised to a negative power", _first_bad(x, bad))
        with np.errstate(over="ignore", invalid="ignore"):
            return _check(np.power(a_arr, b_arr), x, "power")
    if isinstance(node, Call):
        u = np.asarray(_eval(node.arg, x), dtype=float)
        f = node.func
        if f == "sqrt":
            bad = u < 0
            if np.any(bad):
                raise DomainError("sqrt of a negative number", _first_bad(x, bad))
            return np.sqrt(u)
        if f == "ln":
            bad = u <= 0
            if np.any(bad):
                raise DomainError("ln of a non-positive number", _first_bad(x, bad))
            return np.log(u)
        if f == "exp":
            with np.errstate(over="ignore"):
                return _check(np.exp(u), x, "exp")
        if f == "tan":
            return _check(np.tan(u), x, "tan")
        return _UNARY[f](u)
    raise TypeError(f"not an expression node: {node!r}")


_UNARY = {"sin": np.sin, "cos": np.cos, "abs": np.abs, "sign": np.sign}


# --------------------------------------------------------------------------
# smart constructors (constant folding of literal arithmetic only)


def _fold(op: str, a: float, b: float) -> float | None:
    try:
        if op == "+":
            r = a + b
        elif op == "-":
            r = a - b
        elif op == "*":
            r = a * b
        elif op == "/":
            r = a / b
        else:
            if a < 0 and b != round(b):
                return None
            r = a**b
    except (ZeroDivisionError, OverflowError):
        return None
    if isinstance(r, complex) or not math.isfinite(r):
        return None
    return r


def add(a: Node, b: Node) -> Node:
    if isinstance(a, Num) and isinstance(b, Num):
        r = _fold("+", a.value, b.value)
        if r is not None:
            return Num(r)
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    return BinOp("+", a, b)


def sub(a: Node, b: Node) -> Node:
    if isinstance(a, Num) and isinstance(b, Num):
        r = _fold("-", a.value, b.value)
        if r is not None:
            return Num(r)
    if b == ZERO:
        return a
    if a == ZERO:
        return neg(b)
    return BinOp("-", a, b)


def mul(a: Node, b: Node) -> Node:
    if isinstance(a, Num) and isinstance(b, Num):
        r = _fold("*", a.value, b.value)
        if r is not None:
            return Num(r)
    # 0*g is not folded: g may be out of domain
    if a == ONE:
        return b
    if b == ONE:
        return a
    return BinOp("*", a, b)


def div(a: Node, b: Node) -> Node:
    if isinstance(a, Num) and isinstance(b, Num):
        r = _fold("/", a.value, b.value)
        if r is not None:
            return Num(r)
    if b == ONE:
        return a
    return BinOp("/", a, b)


def pow_(a: Node, b: Node) -> Node:
    if isinstance(a, Num) and isinstance(b, Num):
        r = _fold("^", a.value, b.value)
        if r is not None:
            return Num(r)
    if b == ONE:
        return a
    return BinOp("^", a, b)


def neg(a: Node) -> Node:
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


# --------------------------------------------------------------------------
# differentiation


def _contains_var(node: Node) -> bool:
    if isinstance(node, Var):
        return True
    if isinstance(node, Num):
        return False
    if isinstance(node, (Neg, Call)):
        return _contains_var(node.arg)
    return _contains_var(node.left) or _contains_var(node.right)


def _d(node: Node) -> Node:
    if isinstance(node, Num):
        return ZERO
    if isinstance(node, Var):
        return ONE
    if isinstance(node, Neg):
        return neg(_d(node.arg))
    if isinstance(node, BinOp):
        a, b = node.left, node.right
        da, db = _d(a), _d(b)
        if node.op == "+":
            return add(da, db)
        if node.op == "-":
            return sub(da, db)
        if node.op == "*":
            return add(mul(da, b), mul(a, db))
        if node.op == "/":
            return div(sub(mul(da, b), mul(a, db)), pow_(b, Num(2.0)))
        if not _contains_var(b):
            # d(a^c) = c a^(c-1) a'
            return mul(mul(b, pow_(a, sub(b, ONE))), da)
        # d(a^b) = a^b (b' ln a + b a'/a)
        return mul(node, add(mul(db, Call("ln", a)), div(mul(b, da), a)))
    if isinstance(node, Call):
        u = node.arg
        du = _d(u)
        f = node.func
        if f == "sin":
            outer = Call("cos", u)
        elif f == "cos":
            outer = neg(Call("sin", u))
        elif f == "tan":
            outer = div(ONE, pow_(Call("cos", u), Num(2.0)))
        elif f == "exp":
            outer = node
        elif f == "ln":
            return div(du, u)
        elif f == "sqrt":
            return div(du, mul(Num(2.0), node))
        elif f == "abs":
            outer = Call("sign", u)
        elif f == "sign":
            return ZERO
        else:
            raise TypeError(f"unknown function {f!r}")
        return mul(outer, du)
    raise TypeError(f"not an expression node: {node!r}")


# --------------------------------------------------------------------------
# rendering

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _fmt_number(v: float) -> str:
    if math.isfinite(v) and v == int(v) and abs(v) < 1e15 and math.copysign(1.0, v) > 0:
        s = str(int(v))
    else:
        s = repr(v)
    return f"({s})" if v < 0 or s.startswith("-") else s


def _render(node: Node) -> tuple[str, int]:
    if isinstance(node, Num):
        return _fmt_number(node.value), 5
    if isinstance(node, Var):
        return node.name, 5
    if isinstance(node, Call):
        return f"{node.func}({_render(node.arg)[0]})", 5
    if isinstance(node, Neg):
        s, p = _render(node.arg)
        if p < _PREC["neg"]:
            s = f"({s})"
        return f"-{s}", _PREC["neg"]
    prec = _PREC[node.op]
    ls, lp = _render(node.left)
    rs, rp = _render(node.right)
    if node.op == "^":
        # right-assoc: only atoms as base; exponent parenthesised unless atomic
        if lp <= prec:
            ls = f"({ls})"
        if rp < 5:
            rs = f"({rs})"
        return f"{ls}^{rs}", prec
    if lp < prec:
        ls = f"({ls})"
    # keep the tree shape exactly, so a round trip is bit-identical
    if rp <= prec:
        rs = f"({rs})"
    return f"{ls} {node.op} {rs}", prec


# --------------------------------------------------------------------------
# public API


@dataclass(frozen=True)
class Expression:
    """Immutable parsed expression in one variable."""

    ast: Node
    variable: str = "x"

    def __call__(self, x):
        return evaluate(self, x)

    def derivative(self) -> "Expression":
        return differentiate(self)

    def __str__(self) -> str:
        return render(self)


def parse(source: str, variable: str = "x") -> Expression:
    if variable in FUNCTIONS or not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", variable):
        raise ValueError(f"invalid variable name {variable!r}")
    return Expression(_Parser(source, variable).parse(), variable)


def evaluate(e: Expression, x):
    """Evaluate ``e`` at a float or array ``x``.

    Arrays are evaluated elementwise and the result has the shape of ``x``.
    A :class:`DomainError` names the first offending abscissa.
    """
    scalar = np.ndim(x) == 0
    xa = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = _eval(e.ast, xa)
    out = _check(np.asarray(out, dtype=float), xa, "result")
    if scalar:
        return float(out)
    return np.broadcast_to(out, xa.shape).copy() if out.shape != xa.shape else out


def differentiate(e: Expression) -> Expression:
    return Expression(_d(e.ast), e.variable)


def render(e: Expression) -> str:
    return _render(e.ast)[0]
