"""Energy expression language: parser, printer and second-order forward AD.

The grammar is small on purpose::

    expr    = term { ("+"|"-") term } ;
    term    = factor { ("*"|"/") factor } ;
    factor  = unary [ "^" factor ] ;
    unary   = "-" unary | primary ;
    primary = NUMBER | VAR | FUNC "(" expr ")" | "(" expr ")" ;

Note that ``-t^2`` therefore means ``(-t)^2``.
"""
from __future__ import annotations

import re
import warnings
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DomainError, ParseError, SymmetryWarning, UnknownIdentifier, WrongVariable
from .scalar import ScalarFunction

FUNCS = ("log", "exp", "sqrt", "abs", "sin", "cos")
VARIABLES = ("t", "z", "r")


# ---------------------------------------------------------------- AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class Add:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Sub:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Mul:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Div:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Var, Neg, Add, Sub, Mul, Div, Pow, Call]
_BINOPS = {"+": Add, "-": Sub, "*": Mul, "/": Div, "^": Pow}
_SYMBOL = {Add: "+", Sub: "-", Mul: "*", Div: "/", Pow: "^"}
_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2}


# ---------------------------------------------------------------- lexer / parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


@dataclass
class _Tok:
    kind: str  # "num" | "name" | "op" | "end"
    text: str
    offset: int  # byte offset into the source


def _tokenize(src: str) -> list[_Tok]:
    toks = []
    pos = 0
    while True:
        while pos < len(src) and src[pos].isspace():
            pos += 1
        if pos == len(src):
            break
        m = _TOKEN.match(src, pos)
        byte_off = len(src[:pos].encode())
        if m is None or m.end() == pos:
            raise ParseError(f"unexpected character {src[pos]!r}", byte_off, src)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append(_Tok(kind, m.group(kind), len(src[:start].encode())))
        pos = m.end()
    toks.append(_Tok("end", "", len(src.encode())))
    return toks


class _Parser:
    def __init__(self, src: str, var_name: str):
        self.src = src
        self.var = var_name
        self.toks = _tokenize(src)
        self.i = 0

    @property
    def cur(self) -> _Tok:
        return self.toks[self.i]

    def _is_op(self, ch) -> bool:
        return self.cur.kind == "op" and self.cur.text == ch

    def _expect(self, ch):
        if not self._is_op(ch):
            what = self.cur.text or "end of input"
            raise ParseError(f"expected {ch!r}, found {what!r}", self.cur.offset, self.src)
        self.i += 1

    def parse(self) -> Expr:
        node = self.expr()
        if self.cur.kind != "end":
            raise ParseError(f"unexpected token {self.cur.text!r}", self.cur.offset, self.src)
        return node

    def expr(self):
        node = self.term()
        while self.cur.kind == "op" and self.cur.text in "+-":
            op = self.cur.text
            self.i += 1
            node = _BINOPS[op](node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.cur.kind == "op" and self.cur.text in "*/":
            op = self.cur.text
            self.i += 1
            node = _BINOPS[op](node, self.factor())
        return node

    def factor(self):
        base = self.unary()
        if self._is_op("^"):
            self.i += 1
            return Pow(base, self.factor())
        return base

    def unary(self):
        if self._is_op("-"):
            self.i += 1
            return Neg(self.unary())
        return self.primary()

    def primary(self):
        tok = self.cur
        if tok.kind == "num":
            self.i += 1
            return Num(float(tok.text))
        if tok.kind == "name":
            self.i += 1
            if tok.text in FUNCS:
                self._expect("(")
                arg = self.expr()
                self._expect(")")
                return Call(tok.text, arg)
            if tok.text == self.var:
                return Var(tok.text)
            if tok.text in VARIABLES:
                raise WrongVariable(tok.text, self.var, tok.offset, self.src)
            raise UnknownIdentifier(tok.text, tok.offset, self.src)
        if self._is_op("("):
            self.i += 1
            node = self.expr()
            self._expect(")")
            return node
        what = tok.text or "end of input"
        raise ParseError(f"unexpected {what!r}", tok.offset, self.src)


def parse(src: str, var_name: str = "t") -> Expr:
    """Parse ``src`` into an expression tree over the single variable ``var_name``.

    Raises
    ------
    ParseError
        Malformed input; carries the byte offset (``SyntaxError`` subclass).
    UnknownIdentifier, WrongVariable
        Names other than the declared variable and the six functions.
    """
    if not src or not src.strip():
        raise ParseError("empty expression", 0, src)
    return _Parser(src, var_name).parse()


# ---------------------------------------------------------------- printer


def _fmt_num(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def to_string(e: Expr) -> str:
    """Canonical text with the minimal parentheses that reparse to the same tree."""
    if isinstance(e, Num):
        return _fmt_num(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({to_string(e.arg)})"
    if isinstance(e, Neg):
        inner = to_string(e.operand)
        if not isinstance(e.operand, (Num, Var, Call, Neg)):
            inner = f"({inner})"
        return "-" + inner
    if isinstance(e, Pow):
        left = to_string(e.left)
        if not isinstance(e.left, (Num, Var, Call, Neg)):
            left = f"({left})"
        right = to_string(e.right)
        if not isinstance(e.right, (Num, Var, Call, Neg, Pow)):
            right = f"({right})"
        return f"{left}^{right}"
    prec = _PREC[type(e)]
    left = to_string(e.left)
    if type(e.left) in _PREC and _PREC[type(e.left)] < prec:
        left = f"({left})"
    right = to_string(e.right)
    if type(e.right) in _PREC and _PREC[type(e.right)] <= prec:
        right = f"({right})"
    return f"{left} {_SYMBOL[type(e)]} {right}"


def variables(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Num):
        return set()
    if isinstance(e, (Neg,)):
        return variables(e.operand)
    if isinstance(e, Call):
        return variables(e.arg)
    return variables(e.left) | variables(e.right)


# ---------------------------------------------------------------- second-order jets


@dataclass(frozen=True)
class Jet2:
    """Truncated Taylor coefficients (value, first, second derivative).

    Components may be numpy arrays; arithmetic is elementwise.  Invalid points
    are carried as NaN and turned into :class:`DomainError` by :func:`eval_jet`.
    """

    value: np.ndarray
    d1: np.ndarray
    d2: np.ndarray

    @staticmethod
    def const(c, like) -> "Jet2":
        z = np.zeros_like(like, dtype=float)
        return Jet2(z + c, z, z)

    @staticmethod
    def var(x) -> "Jet2":
        x = np.asarray(x, dtype=float)
        return Jet2(x, np.ones_like(x), np.zeros_like(x))

    def __add__(self, o: "Jet2") -> "Jet2":
        return Jet2(self.value + o.value, self.d1 + o.d1, self.d2 + o.d2)

    def __sub__(self, o: "Jet2") -> "Jet2":
        return Jet2(self.value - o.value, self.d1 - o.d1, self.d2 - o.d2)

    def __neg__(self) -> "Jet2":
        return Jet2(-self.value, -self.d1, -self.d2)

    def __mul__(self, o: "Jet2") -> "Jet2":
        a, b = self, o
        return Jet2(a.value * b.value,
                    a.d1 * b.value + a.value * b.d1,
                    a.d2 * b.value + 2 * a.d1 * b.d1 + a.value * b.d2)

    def compose(self, f0, f1, f2) -> "Jet2":
        """Chain rule for phi(self) given phi, phi', phi'' at ``self.value``."""
        return Jet2(f0, f1 * self.d1, f2 * self.d1**2 + f1 * self.d2)

    def reciprocal(self) -> "Jet2":
        b = self.value
        bad = b == 0
        b = np.where(bad, np.nan, b)
        return self.compose(1 / b, -1 / b**2, 2 / b**3)

    def __truediv__(self, o: "Jet2") -> "Jet2":
        return self * o.reciprocal()

    def powi(self, n: int) -> "Jet2":
        """Integer power by the power rule; 0 to a negative power is undefined."""
        a = self.value
        if n == 0:
            return Jet2.const(1.0, a)
        if n < 0:
            a = np.where(a == 0, np.nan, a)
        f0 = a**n if n > 0 else 1.0 / a ** (-n)
        f1 = n * (a ** (n - 1) if n >= 1 else 1.0 / a ** (1 - n))
        if n * (n - 1) == 0:
            f2 = np.zeros_like(a)
        else:
            f2 = n * (n - 1) * (a ** (n - 2) if n >= 2 else 1.0 / a ** (2 - n))
        return self.compose(f0, f1, f2)

    def powf(self, p: float) -> "Jet2":
        a = np.where(self.value > 0, self.value, np.nan)
        return self.compose(a**p, p * a ** (p - 1), p * (p - 1) * a ** (p - 2))

    def log(self) -> "Jet2":
        a = np.where(self.value > 0, self.value, np.nan)
        return self.compose(np.log(a), 1 / a, -1 / a**2)

    def exp(self) -> "Jet2":
        e = np.exp(self.value)
        return self.compose(e, e, e)

    def sqrt(self) -> "Jet2":
        a = np.where(self.value > 0, self.value, np.nan)
        s = np.sqrt(a)
        return self.compose(s, 0.5 / s, -0.25 / (a * s))

    def abs(self) -> "Jet2":
        a = np.where(self.value != 0, self.value, np.nan)
        return self.compose(np.abs(a), np.sign(a), np.zeros_like(a))

    def sin(self) -> "Jet2":
        return self.compose(np.sin(self.value), np.cos(self.value), -np.sin(self.value))

    def cos(self) -> "Jet2":
        return self.compose(np.cos(self.value), -np.sin(self.value), -np.cos(self.value))


def _jet(e: Expr, x: Jet2) -> Jet2:
    if isinstance(e, Num):
        return Jet2.const(e.value, x.value)
    if isinstance(e, Var):
        return x
    if isinstance(e, Neg):
        return -_jet(e.operand, x)
    if isinstance(e, Call):
        return getattr(_jet(e.arg, x), e.func)()
    if isinstance(e, Pow):
        base = _jet(e.left, x)
        if not variables(e.right):
            p = float(np.asarray(_jet(e.right, Jet2.var(1.0)).value))
            if p.is_integer() and abs(p) <= 2**31:
                return base.powi(int(p))
            return base.powf(p)
        # variable exponent: exp(b log a), a > 0
        return (_jet(e.right, x) * base.log()).exp()
    left, right = _jet(e.left, x), _jet(e.right, x)
    if isinstance(e, Add):
        return left + right
    if isinstance(e, Sub):
        return left - right
    if isinstance(e, Mul):
        return left * right
    return left / right


def eval_jet(e: Expr, x, strict: bool = True) -> Jet2:
    """Value, first and second derivative of ``e`` at ``x`` (scalar or array).

    Raises
    ------
    DomainError
        When ``strict`` and any point is outside the real domain (log/sqrt of
        a nonpositive value, division by zero, 0 to a negative power, abs at 0,
        non-integer power of a nonpositive base).
    """
    with np.errstate(all="ignore"):
        j = _jet(e, Jet2.var(x))
    value = np.asarray(j.value, float)
    d1 = np.asarray(j.d1, float)
    d2 = np.asarray(j.d2, float)
    if strict:
        bad = ~(np.isfinite(value) & np.isfinite(d1) & np.isfinite(d2))
        if np.any(bad):
            xs = np.broadcast_to(np.asarray(x, float), bad.shape)[bad]
            raise DomainError(f"{to_string(e)} undefined at {xs.flat[0]!r}")
    if value.ndim == 0:
        return Jet2(float(value), float(d1), float(d2))
    return Jet2(value, d1, d2)


def to_scalar_function(e: Expr) -> ScalarFunction:
    def jet(x):
        j = eval_jet(e, x, strict=False)
        return j.value, j.d1, j.d2

    return ScalarFunction(jet, "ad", to_string(e))


def make_split_energy(h_src: str, f_src: str, name: str = "custom", check_symmetry: bool = True):
    """Build a split energy from text formulas for h(t) (branch t >= 1) and f(z).

    The h formula is extended to t < 1 by reflection.  When the formula is not
    itself symmetric under t -> 1/t a :class:`SymmetryWarning` is issued; the
    energy is still built from the t >= 1 branch.
    """
    from .energy_core import SplitEnergy

    h_expr = parse(h_src, "t")
    f_expr = parse(f_src, "z")
    h = to_scalar_function(h_expr)
    f = to_scalar_function(f_expr)
    if check_symmetry:
        ts = np.geomspace(1.0 + 1e-3, 1e3, 64)
        with np.errstate(all="ignore"):
            a = h(ts, strict=False)
            b = h(1 / ts, strict=False)
        ok = np.isfinite(a) & np.isfinite(b)
        gap = np.abs(a - b)[ok]
        if not np.all(ok) or (gap.size and gap.max() > 1e-10 * (1 + np.abs(a[ok]).max())):
            warnings.warn(
                f"h(t) = {to_string(h_expr)} is not symmetric under t -> 1/t; "
                "using its t >= 1 branch extended by reflection",
                SymmetryWarning,
                stacklevel=2,
            )
    return SplitEnergy(name, h, f)
