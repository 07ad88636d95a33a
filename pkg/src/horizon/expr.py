"""A small expression language for scale factors and warping functions.

Grammar (one free variable, spelled ``t``, ``r`` or ``x``)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := atom (("^" | "**") unary)?
    atom    := NUMBER | VARIABLE | "pi" | "e"
             | FUNC "(" expr ")"
             | "piecewise" "(" expr ("," NUMBER "," expr)* ")"
             | "(" expr ")"
    FUNC    := "exp" | "log" | "sqrt"

``piecewise(f0, b1, f1, b2, f2)`` is ``f0`` below ``b1``, ``f1`` on
``[b1, b2)`` and ``f2`` from ``b2`` on.

Besides numeric evaluation, every expression can report its leading
asymptotic form ``C * x**p * exp(rate*x) * log(x)**q`` at either infinite
end, which is what the convergence tests in :mod:`horizon.cosmo` consume.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidParameter

VARIABLES = ("t", "r", "x")
FUNCTIONS = ("exp", "log", "sqrt")

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^(),]))"
)


class ExpressionSyntaxError(InvalidParameter):
    def __init__(self, message, position):
        self.position = position
        super().__init__(f"{message} at column {position + 1}")


# --------------------------------------------------------------------------
# AST
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Node:
    def __call__(self, x):
        return self.evaluate(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class Const(Node):
    value: float

    def evaluate(self, x):
        return np.full_like(x, self.value, dtype=float)

    def to_text(self):
        if self.value == math.pi:
            return "pi"
        return repr(float(self.value)) if self.value >= 0 else f"({self.value!r})"


@dataclass(frozen=True)
class Var(Node):
    def evaluate(self, x):
        return np.array(x, dtype=float)

    def to_text(self):
        return "x"


@dataclass(frozen=True)
class Binary(Node):
    op: str
    left: Node
    right: Node

    def evaluate(self, x):
        a = self.left.evaluate(x)
        b = self.right.evaluate(x)
        with np.errstate(all="ignore"):
            if self.op == "+":
                return a + b
            if self.op == "-":
                return a - b
            if self.op == "*":
                return a * b
            if self.op == "/":
                return a / b
            return np.power(a, b)

    def to_text(self):
        return f"({self.left.to_text()} {self.op} {self.right.to_text()})"


@dataclass(frozen=True)
class Neg(Node):
    arg: Node

    def evaluate(self, x):
        return -self.arg.evaluate(x)

    def to_text(self):
        return f"(-{self.arg.to_text()})"


@dataclass(frozen=True)
class Func(Node):
    name: str
    arg: Node

    def evaluate(self, x):
        a = self.arg.evaluate(x)
        with np.errstate(all="ignore"):
            return getattr(np, self.name)(a)

    def to_text(self):
        return f"{self.name}({self.arg.to_text()})"


@dataclass(frozen=True)
class Piecewise(Node):
    pieces: tuple
    breaks: tuple

    def evaluate(self, x):
        idx = np.searchsorted(np.asarray(self.breaks), x, side="right")
        out = np.empty_like(x, dtype=float)
        for k, piece in enumerate(self.pieces):
            mask = idx == k
            if np.any(mask):
                out[mask] = piece.evaluate(x[mask])
        return out

    def to_text(self):
        parts = [self.pieces[0].to_text()]
        for b, p in zip(self.breaks, self.pieces[1:]):
            parts += [repr(float(b)), p.to_text()]
        return "piecewise(" + ", ".join(parts) + ")"


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------


def _tokenize(text):
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ExpressionSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self, value=None):
        tok = self.tokens[self.i]
        if value is not None and tok[1] != value:
            raise ExpressionSyntaxError(f"expected {value!r}, found {tok[1] or 'end'!r}", tok[2])
        self.i += 1
        return tok

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ExpressionSyntaxError(f"unexpected {tok[1]!r}", tok[2])
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = Binary(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] in ("^", "**"):
            self.take()
            return Binary("^", base, self.unary())
        return base

    def number(self):
        sign = 1.0
        if self.peek()[1] == "-":
            self.take()
            sign = -1.0
        kind, value, pos = self.take()
        if kind != "num":
            raise ExpressionSyntaxError("expected a numeric breakpoint", pos)
        return sign * float(value)

    def atom(self):
        kind, value, pos = self.take()
        if kind == "num":
            return Const(float(value))
        if kind == "name":
            if value in VARIABLES:
                return Var()
            if value == "pi":
                return Const(math.pi)
            if value == "e":
                return Const(math.e)
            if value in FUNCTIONS:
                self.take("(")
                arg = self.expr()
                self.take(")")
                return Func(value, arg)
            if value == "piecewise":
                self.take("(")
                pieces = [self.expr()]
                breaks = []
                while self.peek()[1] == ",":
                    self.take()
                    breaks.append(self.number())
                    self.take(",")
                    pieces.append(self.expr())
                self.take(")")
                if any(b2 <= b1 for b1, b2 in zip(breaks, breaks[1:])):
                    raise ExpressionSyntaxError("piecewise breakpoints must increase", pos)
                return Piecewise(tuple(pieces), tuple(breaks))
            raise ExpressionSyntaxError(f"unknown name {value!r}", pos)
        if value == "(":
            node = self.expr()
            self.take(")")
            return node
        raise ExpressionSyntaxError(f"unexpected {value or 'end'!r}", pos)


def parse(text: str) -> Node:
    """Parse ``text`` into an expression tree."""
    if not isinstance(text, str) or not text.strip():
        raise ExpressionSyntaxError("empty expression", 0)
    return _Parser(text).parse()


# --------------------------------------------------------------------------
# Asymptotics
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Asymptotic:
    """Leading behaviour ``coef * x**power * exp(rate*x) * log(x)**logpow``.

    ``rate`` may be ``+-inf`` for super-exponential terms. ``stretch`` is the
    sign of a sub-exponential but super-polynomial factor such as
    ``exp(-sqrt(x))``. When ``exact`` is false only the sign/rate class is
    reliable, not ``coef`` or ``power``.
    """

    coef: float
    power: float = 0.0
    rate: float = 0.0
    logpow: float = 0.0
    stretch: int = 0
    exact: bool = True

    def key(self):
        return (self.rate, self.stretch, self.power, self.logpow)

    def times(self, other):
        return Asymptotic(
            self.coef * other.coef,
            self.power + other.power,
            self.rate + other.rate if not _opposite_inf(self.rate, other.rate) else math.nan,
            self.logpow + other.logpow,
            _combine_stretch(self.stretch, other.stretch),
            self.exact and other.exact,
        )

    def raised(self, k):
        if self.coef < 0 and float(k) != int(k):
            return None
        return Asymptotic(
            self.coef**k,
            self.power * k,
            self.rate * k,
            self.logpow * k,
            int(np.sign(k)) * self.stretch,
            self.exact,
        )


def _opposite_inf(a, b):
    return math.isinf(a) and math.isinf(b) and a != b


def _combine_stretch(a, b):
    if a and b and a != b:
        return 0
    return a or b


def _const_value(node):
    """Return the numeric value of a variable-free subtree, else None."""
    if isinstance(node, Var):
        return None
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Neg):
        v = _const_value(node.arg)
        return None if v is None else -v
    if isinstance(node, Func):
        v = _const_value(node.arg)
        return None if v is None else float(getattr(np, node.name)(v))
    if isinstance(node, Binary):
        a, b = _const_value(node.left), _const_value(node.right)
        if a is None or b is None:
            return None
        return float(Binary(node.op, Const(a), Const(b)).evaluate(np.zeros(1))[0])
    return None


def asymptotic(node: Node, end: float = math.inf):
    """Leading asymptotic form of ``node`` as the variable tends to ``end``.

    ``end`` is ``+inf`` or ``-inf``. For ``-inf`` the form is expressed in the
    reflected variable ``y = -x -> +inf``. Returns ``None`` when the leading
    term cannot be determined symbolically (cancellation, unsupported
    composition).
    """
    sign = 1.0 if end > 0 else -1.0
    try:
        res = _asym(node, sign)
    except (OverflowError, ZeroDivisionError, ValueError):
        return None
    if res is None or math.isnan(res.rate) or res.coef == 0 or not math.isfinite(res.coef):
        return None
    return res


def _asym(node, sign):
    c = _const_value(node)
    if c is not None:
        return Asymptotic(c)
    if isinstance(node, Var):
        return Asymptotic(sign, 1.0)
    if isinstance(node, Neg):
        a = _asym(node.arg, sign)
        return None if a is None else replace(a, coef=-a.coef)
    if isinstance(node, Piecewise):
        return _asym(node.pieces[-1] if sign > 0 else node.pieces[0], sign)
    if isinstance(node, Func):
        a = _asym(node.arg, sign)
        if a is None:
            return None
        if node.name == "sqrt":
            return a.raised(0.5)
        if node.name == "exp":
            return _asym_exp(a)
        return _asym_log(a)
    if isinstance(node, Binary):
        if node.op == "^":
            k = _const_value(node.right)
            if k is None:
                # b**f = exp(f * log b)
                return _asym(Func("exp", Binary("*", node.right, Func("log", node.left))), sign)
            a = _asym(node.left, sign)
            return None if a is None else a.raised(k)
        a = _asym(node.left, sign)
        b = _asym(node.right, sign)
        if a is None or b is None:
            return None
        if node.op == "*":
            return a.times(b)
        if node.op == "/":
            inv = b.raised(-1)
            return None if inv is None else a.times(inv)
        if node.op == "-":
            b = replace(b, coef=-b.coef)
        return _asym_add(a, b)
    return None


def _asym_add(a, b):
    if a.coef == 0:
        return b
    if b.coef == 0:
        return a
    if a.key() > b.key():
        return a
    if b.key() > a.key():
        return b
    if not (a.exact and b.exact):
        return None
    total = a.coef + b.coef
    if total == 0 or abs(total) < 1e-12 * max(abs(a.coef), abs(b.coef)):
        return None  # leading terms cancel
    return replace(a, coef=total)


def _asym_exp(a):
    """exp of a function whose leading term is ``a``."""
    if a.rate != 0 or a.stretch != 0:
        return Asymptotic(1.0, rate=math.copysign(math.inf, a.coef), exact=False)
    p, q = a.power, a.logpow
    if p > 1 or (p == 1 and q > 0):
        return Asymptotic(1.0, rate=math.copysign(math.inf, a.coef), exact=False)
    if p == 1 and q == 0:
        # lower-order terms of the exponent only change the polynomial prefactor
        return Asymptotic(1.0, rate=a.coef, exact=False)
    if p > 0 or (p == 1 and q < 0):
        return Asymptotic(1.0, stretch=int(np.sign(a.coef)), exact=False)
    if p == 0 and q == 0:
        return Asymptotic(math.exp(a.coef))
    if p == 0 and q == 1:
        return Asymptotic(1.0, power=a.coef, exact=False)
    if p == 0 and q > 1:
        return Asymptotic(1.0, stretch=int(np.sign(a.coef)), exact=False)
    if p < 0:
        return Asymptotic(1.0)  # exponent -> 0
    return None


def _asym_log(a):
    if a.coef <= 0:
        return None
    if math.isinf(a.rate) or a.stretch != 0:
        return None
    if a.rate != 0:
        return Asymptotic(a.rate, 1.0, exact=a.exact)
    if a.power != 0:
        return Asymptotic(a.power, 0.0, logpow=1.0, exact=a.exact)
    if a.logpow != 0:
        return None
    if a.coef == 1:
        return None
    return Asymptotic(math.log(a.coef), exact=a.exact)


# --------------------------------------------------------------------------
# User-facing wrapper
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ScaleFactorSpec:
    """A positive function on an interval given by an expression.

    ``domain`` is an open interval ``(lo, hi)``; either end may be infinite.
    Construction checks positivity on a dense sample of the domain and at
    both sides of every piecewise breakpoint.
    """

    expression: str
    domain: tuple = (-math.inf, math.inf)
    tree: Node = field(init=False, repr=False, compare=False)
    asymptotic_exponents: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        tree = parse(self.expression)
        lo, hi = (float(self.domain[0]), float(self.domain[1]))
        if not lo < hi:
            raise InvalidParameter(f"empty domain {self.domain!r}")
        object.__setattr__(self, "domain", (lo, hi))
        object.__setattr__(self, "tree", tree)
        xs = self.sample_points()
        vals = tree.evaluate(xs)
        # +inf from overflow still certifies positivity
        ok = (vals > 0) & ~np.isnan(vals)
        if not np.all(ok):
            bad = xs[~ok][0]
            raise InvalidParameter(f"scale factor {self.expression!r} is not positive at {bad:g}")
        exps = {}
        if math.isinf(hi):
            exps["+inf"] = asymptotic(tree, math.inf)
        if math.isinf(lo):
            exps["-inf"] = asymptotic(tree, -math.inf)
        object.__setattr__(self, "asymptotic_exponents", exps)

    def __call__(self, x):
        return self.tree.evaluate(np.asarray(x, dtype=float))

    def sample_points(self, n=2001):
        """Dense sample of the domain, geometric towards infinite ends."""
        lo, hi = self.domain
        a = lo if math.isfinite(lo) else min(-1.0, hi - 1.0) if math.isfinite(hi) else -1.0
        b = hi if math.isfinite(hi) else max(1.0, lo + 1.0) if math.isfinite(lo) else 1.0
        width = b - a
        core = np.linspace(a + 1e-9 * width, b - 1e-9 * width, n)
        parts = [core]
        if math.isinf(hi):
            parts.append(b + np.geomspace(1e-3, 40.0, 200))
        if math.isinf(lo):
            parts.append(a - np.geomspace(1e-3, 40.0, 200))
        tree = parse(self.expression)
        if isinstance(tree, Piecewise):
            eps = 1e-9
            for bp in tree.breaks:
                parts.append(np.array([bp - eps, bp, bp + eps]))
        xs = np.concatenate(parts)
        return np.sort(xs[(xs > lo) & (xs < hi)])

    def scaled(self, c: float) -> "ScaleFactorSpec":
        return ScaleFactorSpec(f"({c!r}) * ({self.expression})", self.domain)
