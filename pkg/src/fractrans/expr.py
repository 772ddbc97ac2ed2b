"""Closed-form arithmetic expressions in the plane variables x1, x2.

Grammar (standard precedence, ``^`` binds tightest, then unary minus,
then ``* /``, then ``+ -``; ``+ - * /`` associate left, ``^`` right)::

    sum    :=  term  (('+' | '-') term)*
    term   :=  unary (('*' | '/') unary)*
    unary  :=  '-' unary | power
    power  :=  atom ('^' unary)?
    atom   :=  NUMBER | 'x1' | 'x2' | FUNC '(' sum ')' | '(' sum ')'
    FUNC   :=  exp | log | sqrt | abs | sin | cos

Expressions are immutable trees; evaluation is pure, accepts floats or
numpy arrays, and raises :class:`EvalError` instead of producing NaN/inf
(a silent non-finite value would corrupt every quadrature sum built on
top of it).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Expr",
    "ExprError",
    "ParseError",
    "EvalError",
    "parse",
    "evaluate",
    "differentiate",
    "const",
    "var",
]


class ExprError(Exception):
    """Base class for expression failures."""


class ParseError(ExprError):
    """Malformed expression text; carries the offending position."""

    def __init__(self, message, position):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class EvalError(ExprError):
    """Evaluation left the domain of definition of a subexpression."""

    def __init__(self, message, subexpr):
        super().__init__(f"{message} in subexpression '{subexpr}'")
        self.subexpr = str(subexpr)


# Rendering precedence levels, used to insert a minimal set of parentheses.
_P_SUM, _P_TERM, _P_UNARY, _P_POW, _P_ATOM = 1, 2, 3, 4, 5


class Expr:
    """Base node. Subclasses implement eval/diff/render."""

    prec = _P_ATOM

    def __call__(self, x1, x2):
        return evaluate(self, x1, x2)

    def __str__(self):
        return self._render()

    def __repr__(self):
        return f"{type(self).__name__}({self._render()!r})"

    def _render(self):
        raise NotImplementedError

    def _wrap(self, child, min_prec):
        s = child._render()
        return f"({s})" if child.prec < min_prec else s


@dataclass(frozen=True, repr=False)
class Const(Expr):
    value: float
    prec = _P_ATOM

    def _render(self):
        if self.value < 0:
            return f"({self.value!r})"
        return repr(self.value)


@dataclass(frozen=True, repr=False)
class Var(Expr):
    name: str
    prec = _P_ATOM

    def _render(self):
        return self.name


@dataclass(frozen=True, repr=False)
class Neg(Expr):
    arg: Expr
    prec = _P_UNARY

    def _render(self):
        return "-" + self._wrap(self.arg, _P_UNARY)


@dataclass(frozen=True, repr=False)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    @property
    def prec(self):
        return {"+": _P_SUM, "-": _P_SUM, "*": _P_TERM, "/": _P_TERM, "^": _P_POW}[self.op]

    def _render(self):
        p = self.prec
        if self.op == "^":
            # right-associative: parenthesize a compound base, not the exponent
            return f"{self._wrap(self.left, p + 1)}^{self._wrap(self.right, _P_UNARY)}"
        # left-associative: the right operand of - and / needs one level more
        rp = p + 1 if self.op in ("-", "/") else p
        return f"{self._wrap(self.left, p)} {self.op} {self._wrap(self.right, rp)}"


@dataclass(frozen=True, repr=False)
class Call(Expr):
    fn: str
    arg: Expr
    prec = _P_ATOM

    def _render(self):
        return f"{self.fn}({self.arg._render()})"


_FUNCTIONS = ("exp", "log", "sqrt", "abs", "sin", "cos")
_VARIABLES = ("x1", "x2")

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            # skip over trailing whitespace before declaring failure
            rest = text[pos:]
            if rest.strip() == "":
                break
            raise ParseError(f"unexpected character {rest.strip()[0]!r}", pos)
        if m.lastgroup == "num":
            tokens.append(("num", float(m.group("num")), m.start("num")))
        elif m.lastgroup == "name":
            tokens.append(("name", m.group("name"), m.start("name")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", None, len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, val, pos = self.next()
        if kind != "op" or val != op:
            raise ParseError(f"expected '{op}'", pos)

    def parse(self):
        e = self.sum()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected trailing input {val!r}", pos)
        return e

    def sum(self):
        e = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in ("+", "-"):
                self.next()
                e = BinOp(val, e, self.term())
            else:
                return e

    def term(self):
        e = self.unary()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in ("*", "/"):
                self.next()
                e = BinOp(val, e, self.unary())
            else:
                return e

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.next()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.next()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, val, pos = self.next()
        if kind == "num":
            return Const(val)
        if kind == "name":
            if val in _VARIABLES:
                return Var(val)
            if val in _FUNCTIONS:
                self.expect_op("(")
                arg = self.sum()
                self.expect_op(")")
                return Call(val, arg)
            raise ParseError(f"unknown identifier {val!r}", pos)
        if kind == "op" and val == "(":
            e = self.sum()
            self.expect_op(")")
            return e
        raise ParseError(f"unexpected token {val!r}", pos)


def parse(text):
    """Parse expression text into an immutable :class:`Expr` tree."""
    if not isinstance(text, str) or text.strip() == "":
        raise ParseError("empty expression", 0)
    return _Parser(text).parse()


def const(value):
    """Constant expression node."""
    return Const(float(value))


def var(name):
    """Variable node, name must be 'x1' or 'x2'."""
    if name not in _VARIABLES:
        raise ValueError(f"unknown variable {name!r}")
    return Var(name)


def _check_finite(value, node):
    if not np.all(np.isfinite(value)):
        raise EvalError("non-finite result", node)
    return value


def _eval(node, x1, x2):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return x1 if node.name == "x1" else x2
    if isinstance(node, Neg):
        return -_eval(node.arg, x1, x2)
    if isinstance(node, Call):
        a = _eval(node.arg, x1, x2)
        if node.fn == "exp":
            return _check_finite(np.exp(a), node)
        if node.fn == "log":
            if np.any(np.asarray(a) <= 0.0):
                raise EvalError("log of non-positive value", node)
            return np.log(a)
        if node.fn == "sqrt":
            if np.any(np.asarray(a) < 0.0):
                raise EvalError("sqrt of negative value", node)
            return np.sqrt(a)
        if node.fn == "abs":
            return np.abs(a)
        if node.fn == "sin":
            return np.sin(a)
        if node.fn == "cos":
            return np.cos(a)
        raise EvalError(f"unknown function {node.fn!r}", node)
    # binary operators
    l = _eval(node.left, x1, x2)
    r = _eval(node.right, x1, x2)
    op = node.op
    if op == "+":
        return l + r
    if op == "-":
        return l - r
    if op == "*":
        return l * r
    if op == "/":
        if np.any(np.asarray(r) == 0.0):
            raise EvalError("division by zero", node)
        return l / r
    # power: guard the branches that leave the reals
    l = np.asarray(l, dtype=float)
    r = np.asarray(r, dtype=float)
    integer_exp = np.all(r == np.floor(r))
    if integer_exp:
        if np.any((l == 0.0) & (r < 0.0)):
            raise EvalError("zero raised to a negative power", node)
    else:
        if np.any(l < 0.0):
            raise EvalError("negative base with fractional exponent", node)
        if np.any((l == 0.0) & (r <= 0.0)):
            raise EvalError("zero raised to a non-positive power", node)
    return _check_finite(np.power(l, r), node)


def evaluate(e, x1, x2):
    """Evaluate ``e`` at (x1, x2); scalars in give a float back, arrays broadcast.

    Raises :class:`EvalError` naming the offending subexpression whenever
    the point is outside the domain of definition (log/sqrt/division/power)
    or a value overflows to non-finite.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        out = _eval(e, x1, x2)
    out = np.asarray(_check_finite(out, e), dtype=float)
    out = np.broadcast_to(out, np.broadcast_shapes(out.shape, x1.shape, x2.shape))
    if out.ndim == 0:
        return float(out)
    return np.array(out, dtype=float)


# -- smart constructors with constant folding (keeps derivative trees small,
#    this is not a simplification engine) ------------------------------------


def _is_const(e, v=None):
    return isinstance(e, Const) and (v is None or e.value == v)


def _add(l, r):
    if _is_const(l) and _is_const(r):
        return Const(l.value + r.value)
    if _is_const(l, 0.0):
        return r
    if _is_const(r, 0.0):
        return l
    return BinOp("+", l, r)


def _sub(l, r):
    if _is_const(l) and _is_const(r):
        return Const(l.value - r.value)
    if _is_const(r, 0.0):
        return l
    if _is_const(l, 0.0):
        return _neg(r)
    return BinOp("-", l, r)


def _neg(e):
    if _is_const(e):
        return Const(-e.value)
    if isinstance(e, Neg):
        return e.arg
    return Neg(e)


def _mul(l, r):
    if _is_const(l) and _is_const(r):
        return Const(l.value * r.value)
    if _is_const(l, 0.0) or _is_const(r, 0.0):
        return Const(0.0)
    if _is_const(l, 1.0):
        return r
    if _is_const(r, 1.0):
        return l
    return BinOp("*", l, r)


def _div(l, r):
    if _is_const(l, 0.0):
        return Const(0.0)
    if _is_const(r, 1.0):
        return l
    return BinOp("/", l, r)


def _pow(base, ex):
    if _is_const(ex, 1.0):
        return base
    if _is_const(ex, 0.0):
        return Const(1.0)
    return BinOp("^", base, ex)


def differentiate(e, variable):
    """Exact symbolic derivative of ``e`` with respect to 'x1' or 'x2'.

    The derivative of abs is encoded as arg/abs(arg) times the inner
    derivative, so evaluating it at a zero of the argument raises the
    division-by-zero EvalError: that is the non-smoothness flag.
    """
    if variable not in _VARIABLES:
        raise ValueError(f"unknown variable {variable!r}")
    return _diff(e, variable)


def _diff(e, v):
    if isinstance(e, Const):
        return Const(0.0)
    if isinstance(e, Var):
        return Const(1.0 if e.name == v else 0.0)
    if isinstance(e, Neg):
        return _neg(_diff(e.arg, v))
    if isinstance(e, Call):
        da = _diff(e.arg, v)
        if e.fn == "exp":
            return _mul(Call("exp", e.arg), da)
        if e.fn == "log":
            return _div(da, e.arg)
        if e.fn == "sqrt":
            return _div(da, _mul(Const(2.0), Call("sqrt", e.arg)))
        if e.fn == "abs":
            return _mul(_div(e.arg, Call("abs", e.arg)), da)
        if e.fn == "sin":
            return _mul(Call("cos", e.arg), da)
        if e.fn == "cos":
            return _neg(_mul(Call("sin", e.arg), da))
        raise ValueError(f"unknown function {e.fn!r}")
    dl = _diff(e.left, v)
    dr = _diff(e.right, v)
    if e.op == "+":
        return _add(dl, dr)
    if e.op == "-":
        return _sub(dl, dr)
    if e.op == "*":
        return _add(_mul(dl, e.right), _mul(e.left, dr))
    if e.op == "/":
        num = _sub(_mul(dl, e.right), _mul(e.left, dr))
        return _div(num, _pow(e.right, Const(2.0)))
    # power rule; the general case needs log(base)
    if _is_const(e.right):
        c = e.right.value
        return _mul(_mul(Const(c), _pow(e.left, Const(c - 1.0))), dl)
    general = _add(_mul(dr, Call("log", e.left)), _div(_mul(e.right, dl), e.left))
    return _mul(_pow(e.left, e.right), general)
