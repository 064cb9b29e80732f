"""Expression trees for the scalar coefficient functions of the toolkit.

The grammar is deliberately tiny: decimals, declared symbols, + - * /,
powers with *constant* rational exponents, and sqrt/exp/ln.  That is all the
catalog metrics, spray coefficients, and pipeline inputs need, and keeping
general ``f^g`` out of the language means every expression can be evaluated
exactly in truncated Taylor-jet arithmetic.

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := ('-')? atom ('^' exponent)?
    atom   := number | symbol | '(' expr ')' | func '(' expr ')'
    func   := 'sqrt' | 'exp' | 'ln'
    number := decimal

Exponents are signed rationals: ``x^2``, ``x^-2``, ``x^(3/2)``, and the bare
form ``x^3/2`` all parse; the fraction binds to the exponent (greedily), not
to a trailing division.

Evaluation is generic over the value algebra: floats, numpy arrays, and Jet
objects all work, so the same tree serves point evaluation, vectorized
quadrature, and jet differentiation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Mapping

import numpy as np

__all__ = [
    "Expr",
    "Const",
    "Var",
    "Neg",
    "Call",
    "BinOp",
    "Pow",
    "ExprError",
    "ExprDomainError",
    "parse_expr",
]


class ExprError(ValueError):
    """Syntax or symbol error; ``offset`` is the byte position in the source."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)
        self.offset = offset


class ExprDomainError(ArithmeticError):
    """Evaluation hit a forbidden value (sqrt/ln of non-positive, zero division)."""

    def __init__(self, message: str, node: "Expr | None" = None):
        if node is not None:
            message = f"{message} in subexpression '{node.to_source()}'"
        super().__init__(message)
        self.node = node


# ---------------------------------------------------------------------------
# value-algebra helpers: dispatch on Jet (duck-typed) vs float/ndarray


def _is_jet(v: Any) -> bool:
    return hasattr(v, "jet_coeffs")


def _check_positive(v: Any, what: str, node: "Expr") -> None:
    arr = np.asarray(v)
    if not np.all(np.isfinite(arr)):
        raise ExprDomainError(f"non-finite {what}", node)
    if np.any(arr <= 0.0):
        raise ExprDomainError(f"{what} must be positive", node)


def _sqrt(v: Any, node: "Expr") -> Any:
    if _is_jet(v):
        return v.sqrt()
    _check_positive(v, "sqrt argument", node)
    return np.sqrt(v)


def _exp(v: Any, node: "Expr") -> Any:
    if _is_jet(v):
        return v.exp()
    return np.exp(v)


def _ln(v: Any, node: "Expr") -> Any:
    if _is_jet(v):
        return v.ln()
    _check_positive(v, "ln argument", node)
    return np.log(v)


def _div(a: Any, b: Any, node: "Expr") -> Any:
    if _is_jet(a) or _is_jet(b):
        return a / b
    barr = np.asarray(b)
    if np.any(barr == 0.0):
        raise ExprDomainError("division by zero", node)
    return a / b


def _pow(v: Any, q: Fraction, node: "Expr") -> Any:
    if _is_jet(v):
        return v.pow(q)
    if q.denominator == 1:
        if q < 0 and np.any(np.asarray(v) == 0.0):
            raise ExprDomainError("zero base with negative exponent", node)
        return np.power(v, int(q))
    _check_positive(v, "fractional power base", node)
    return np.power(v, float(q))


# ---------------------------------------------------------------------------
# nodes


class Expr:
    """Base class; concrete nodes are the dataclasses below.

    Arithmetic operators build new trees (numbers are promoted to Const),
    which is how the construction pipeline composes its algebra.
    """

    def eval(self, env: Mapping[str, Any]) -> Any:
        raise NotImplementedError

    def diff(self, var: str) -> "Expr":
        raise NotImplementedError

    def to_source(self) -> str:
        return self._src(0)

    def _src(self, prec: int) -> str:
        raise NotImplementedError

    def symbols(self) -> set[str]:
        out: set[str] = set()
        self._collect_symbols(out)
        return out

    def _collect_symbols(self, out: set[str]) -> None:
        pass

    def __str__(self) -> str:
        return self.to_source()

    @staticmethod
    def _promote(v) -> "Expr":
        if isinstance(v, Expr):
            return v
        if isinstance(v, (int, float)):
            return Const(float(v))
        return NotImplemented

    def __add__(self, other):
        o = Expr._promote(other)
        return NotImplemented if o is NotImplemented else _add(self, o)

    def __radd__(self, other):
        o = Expr._promote(other)
        return NotImplemented if o is NotImplemented else _add(o, self)

    def __sub__(self, other):
        o = Expr._promote(other)
        return NotImplemented if o is NotImplemented else _sub(self, o)

    def __rsub__(self, other):
        o = Expr._promote(other)
        return NotImplemented if o is NotImplemented else _sub(o, self)

    def __mul__(self, other):
        o = Expr._promote(other)
        return NotImplemented if o is NotImplemented else _mul(self, o)

    def __rmul__(self, other):
        o = Expr._promote(other)
        return NotImplemented if o is NotImplemented else _mul(o, self)

    def __truediv__(self, other):
        o = Expr._promote(other)
        return NotImplemented if o is NotImplemented else _div_node(self, o)

    def __rtruediv__(self, other):
        o = Expr._promote(other)
        return NotImplemented if o is NotImplemented else _div_node(o, self)

    def __neg__(self):
        return _neg(self)

    def __pow__(self, exponent):
        if isinstance(exponent, (int, Fraction)):
            return Pow(self, Fraction(exponent))
        return NotImplemented


def _paren(text: str, node_prec: int, parent_prec: int) -> str:
    """Wrap when the node binds more loosely than the context demands."""
    return f"({text})" if node_prec < parent_prec else text


@dataclass(frozen=True)
class Const(Expr):
    value: float

    def eval(self, env):
        return self.value

    def diff(self, var):
        return Const(0.0)

    def _src(self, prec):
        return repr(self.value)


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def eval(self, env):
        return env[self.name]

    def diff(self, var):
        return Const(1.0 if self.name == var else 0.0)

    def _src(self, prec):
        return self.name

    def _collect_symbols(self, out):
        out.add(self.name)


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr

    def eval(self, env):
        return -self.arg.eval(env)

    def diff(self, var):
        return _neg(self.arg.diff(var))

    def _src(self, prec):
        return _paren(f"-{self.arg._src(3)}", 2, prec)

    def _collect_symbols(self, out):
        self.arg._collect_symbols(out)


@dataclass(frozen=True)
class Call(Expr):
    fn: str  # 'sqrt' | 'exp' | 'ln'
    arg: Expr

    def eval(self, env):
        v = self.arg.eval(env)
        if self.fn == "sqrt":
            return _sqrt(v, self)
        if self.fn == "exp":
            return _exp(v, self)
        return _ln(v, self)

    def diff(self, var):
        da = self.arg.diff(var)
        if self.fn == "sqrt":
            return _div_node(da, _mul(Const(2.0), Call("sqrt", self.arg)))
        if self.fn == "exp":
            return _mul(da, self)
        return _div_node(da, self.arg)

    def _src(self, prec):
        return f"{self.fn}({self.arg._src(0)})"

    def _collect_symbols(self, out):
        self.arg._collect_symbols(out)


@dataclass(frozen=True)
class BinOp(Expr):
    op: str  # '+', '-', '*', '/'
    lhs: Expr
    rhs: Expr

    def eval(self, env):
        a = self.lhs.eval(env)
        b = self.rhs.eval(env)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        return _div(a, b, self)

    def diff(self, var):
        da = self.lhs.diff(var)
        db = self.rhs.diff(var)
        if self.op == "+":
            return _add(da, db)
        if self.op == "-":
            return _sub(da, db)
        if self.op == "*":
            return _add(_mul(da, self.rhs), _mul(self.lhs, db))
        num = _sub(_mul(da, self.rhs), _mul(self.lhs, db))
        return _div_node(num, Pow(self.rhs, Fraction(2)))

    def _src(self, prec):
        mine = 1 if self.op in "+-" else 2
        left = self.lhs._src(mine)
        # right operand always needs strictly higher precedence so the
        # reparse reproduces the association structurally
        right = self.rhs._src(mine + 1)
        return _paren(f"{left} {self.op} {right}", mine, prec)

    def _collect_symbols(self, out):
        self.lhs._collect_symbols(out)
        self.rhs._collect_symbols(out)


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: Fraction

    def eval(self, env):
        return _pow(self.base.eval(env), self.exponent, self)

    def diff(self, var):
        q = self.exponent
        db = self.base.diff(var)
        return _mul(_mul(Const(float(q)), Pow(self.base, q - 1)), db)

    def _src(self, prec):
        q = self.exponent
        if q.denominator == 1 and q >= 0:
            etxt = str(q.numerator)
        else:
            etxt = f"({q.numerator}/{q.denominator})" if q.denominator != 1 else f"({q.numerator})"
        return _paren(f"{self.base._src(4)}^{etxt}", 3, prec)

    def _collect_symbols(self, out):
        self.base._collect_symbols(out)


# small constant-folding helpers used by diff() only; they keep derivative
# trees from drowning in '0 * ...' noise but perform no other rewriting
def _is_zero(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 0.0


def _is_one(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 1.0


def _add(a: Expr, b: Expr) -> Expr:
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    return BinOp("+", a, b)


def _sub(a: Expr, b: Expr) -> Expr:
    if _is_zero(b):
        return a
    if _is_zero(a):
        return _neg(b)
    return BinOp("-", a, b)


def _neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def _mul(a: Expr, b: Expr) -> Expr:
    if _is_zero(a) or _is_zero(b):
        return Const(0.0)
    if _is_one(a):
        return b
    if _is_one(b):
        return a
    return BinOp("*", a, b)


def _div_node(a: Expr, b: Expr) -> Expr:
    if _is_zero(a):
        return Const(0.0)
    if _is_one(b):
        return a
    return BinOp("/", a, b)


# ---------------------------------------------------------------------------
# tokenizer / parser

_FUNCS = ("sqrt", "exp", "ln")


@dataclass(frozen=True)
class _Token:
    kind: str  # 'num' | 'name' | 'op'
    text: str
    pos: int


def _tokenize(source: str) -> list[_Token]:
    toks: list[_Token] = []
    i = 0
    n = len(source)
    while i < n:
        c = source[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            seen_dot = False
            while j < n and (source[j].isdigit() or (source[j] == "." and not seen_dot)):
                if source[j] == ".":
                    seen_dot = True
                j += 1
            toks.append(_Token("num", source[i:j], i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            toks.append(_Token("name", source[i:j], i))
            i = j
            continue
        if c in "+-*/^()":
            toks.append(_Token("op", c, i))
            i += 1
            continue
        raise ExprError(f"unexpected character {c!r}", i)
    return toks


class _Parser:
    def __init__(self, tokens: list[_Token], symbols: tuple[str, ...], length: int):
        self.toks = tokens
        self.symbols = symbols
        self.i = 0
        self.length = length

    def peek(self) -> _Token | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self) -> _Token:
        tok = self.peek()
        if tok is None:
            raise ExprError("unexpected end of input", self.length)
        self.i += 1
        return tok

    def expect_op(self, text: str) -> None:
        tok = self.take()
        if tok.kind != "op" or tok.text != text:
            raise ExprError(f"expected {text!r}, found {tok.text!r}", tok.pos)

    def parse(self) -> Expr:
        e = self.expr()
        tok = self.peek()
        if tok is not None:
            raise ExprError(f"trailing input {tok.text!r}", tok.pos)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while (tok := self.peek()) is not None and tok.kind == "op" and tok.text in "+-":
            self.take()
            rhs = self.term()
            e = BinOp(tok.text, e, rhs)
        return e

    def term(self) -> Expr:
        e = self.factor()
        while (tok := self.peek()) is not None and tok.kind == "op" and tok.text in "*/":
            self.take()
            rhs = self.factor()
            e = BinOp(tok.text, e, rhs)
        return e

    def factor(self) -> Expr:
        tok = self.peek()
        negated = False
        if tok is not None and tok.kind == "op" and tok.text == "-":
            self.take()
            negated = True
        e = self.atom()
        tok = self.peek()
        if tok is not None and tok.kind == "op" and tok.text == "^":
            self.take()
            e = Pow(e, self.exponent())
        return Neg(e) if negated else e

    def atom(self) -> Expr:
        tok = self.take()
        if tok.kind == "num":
            return Const(float(tok.text))
        if tok.kind == "name":
            nxt = self.peek()
            if tok.text in _FUNCS and nxt is not None and nxt.kind == "op" and nxt.text == "(":
                self.take()
                arg = self.expr()
                self.expect_op(")")
                return Call(tok.text, arg)
            if tok.text not in self.symbols:
                raise ExprError(f"unknown symbol {tok.text!r}", tok.pos)
            return Var(tok.text)
        if tok.kind == "op" and tok.text == "(":
            e = self.expr()
            self.expect_op(")")
            return e
        raise ExprError(f"unexpected token {tok.text!r}", tok.pos)

    def exponent(self) -> Fraction:
        # signed rational, optionally parenthesized: 2, -2, 3/2, (3/2), (-1/2)
        parens = False
        tok = self.peek()
        if tok is not None and tok.kind == "op" and tok.text == "(":
            self.take()
            parens = True
        sign = 1
        tok = self.peek()
        if tok is not None and tok.kind == "op" and tok.text == "-":
            self.take()
            sign = -1
        tok = self.take()
        if tok.kind != "num":
            raise ExprError("exponent must be a constant number", tok.pos)
        num = _as_fraction(tok.text, tok.pos)
        nxt = self.peek()
        if nxt is not None and nxt.kind == "op" and nxt.text == "/":
            mark = self.i
            self.take()
            den_tok = self.peek()
            if den_tok is not None and den_tok.kind == "num":
                self.take()
                num = num / _as_fraction(den_tok.text, den_tok.pos)
            else:
                if parens:
                    raise ExprError("malformed exponent fraction",
                                    den_tok.pos if den_tok else self.length)
                self.i = mark  # the '/' belongs to the surrounding term
        if parens:
            self.expect_op(")")
        return sign * num


def _as_fraction(text: str, pos: int) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ExprError(f"bad exponent literal {text!r}", pos) from exc


def parse_expr(source: str, symbols: list[str] | tuple[str, ...]) -> Expr:
    """Parse ``source`` over the declared ``symbols``.

    Raises ExprError (with offset) on syntax problems, unknown symbols, and
    non-constant exponents (the grammar has no way to put a symbol after '^',
    so those surface as "exponent must be a constant number").
    """
    if not source or not source.strip():
        raise ExprError("empty expression", 0)
    return _Parser(_tokenize(source), tuple(symbols), len(source)).parse()


def domain_margin(e: Expr, env: Mapping[str, Any]) -> float:
    """Smallest slack among the domain constraints of ``e`` at ``env``.

    sqrt/ln radicands and fractional-power bases contribute their value,
    divisions contribute |denominator|.  Returns +inf for constraint-free
    trees and -inf when evaluation fails outright.
    """
    worst = math.inf

    def visit(node: Expr) -> float:
        nonlocal worst
        if isinstance(node, Const):
            return node.value
        if isinstance(node, Var):
            return float(env[node.name])
        if isinstance(node, Neg):
            return -visit(node.arg)
        if isinstance(node, Call):
            v = visit(node.arg)
            if node.fn in ("sqrt", "ln"):
                worst = min(worst, v)
                if v <= 0.0:
                    raise ExprDomainError("nonpositive radicand", node)
            return float(np.sqrt(v) if node.fn == "sqrt" else (np.log(v) if v > 0 else np.nan)) \
                if node.fn != "exp" else float(np.exp(v))
        if isinstance(node, BinOp):
            a = visit(node.lhs)
            b = visit(node.rhs)
            if node.op == "+":
                return a + b
            if node.op == "-":
                return a - b
            if node.op == "*":
                return a * b
            worst = min(worst, abs(b))
            if b == 0.0:
                raise ExprDomainError("zero denominator", node)
            return a / b
        if isinstance(node, Pow):
            v = visit(node.base)
            q = node.exponent
            if q.denominator != 1:
                worst = min(worst, v)
                if v <= 0.0:
                    raise ExprDomainError("nonpositive fractional-power base", node)
            elif q < 0:
                worst = min(worst, abs(v))
                if v == 0.0:
                    raise ExprDomainError("zero base with negative exponent", node)
            return float(v) ** float(q)
        raise TypeError(f"unknown node {node!r}")

    try:
        visit(e)
    except ExprDomainError:
        return -math.inf
    return worst
