"""Convergence decisions for improper integrals of scale factors."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import InvalidParameter, NonpositiveIntegrand, Undetermined
from .expr import Binary, Const, Func, Neg, Piecewise, ScaleFactorSpec, Var, asymptotic

TRANSFORMS = {"identity": 1.0, "reciprocal": -1.0, "reciprocal_square": -2.0}


@dataclass(frozen=True)
class ConvergenceVerdict:
    """Outcome of an improper-integral decision.

    ``remainder`` bounds the neglected tail (and quadrature error) of
    ``value`` for finite verdicts.
    """

    status: str  # finite | infinite | undetermined
    method: str  # asymptotic_rule | quadrature_with_tail_bound
    value: float | None = None
    remainder: float | None = None
    start: float | None = None
    end: float | None = None
    detail: str = ""

    @property
    def finite(self):
        return self.status == "finite"


def resolve_end(spec, end):
    """Map ``'alpha' | 'omega' | '+inf' | '-inf' | number`` to a domain endpoint."""
    lo, hi = spec.domain
    if isinstance(end, str):
        key = end.strip().lower()
        table = {"alpha": lo, "omega": hi, "+inf": math.inf, "inf": math.inf, "-inf": -math.inf}
        if key not in table:
            raise InvalidParameter(f"unknown integration end {end!r}")
        end = table[key]
    end = float(end)
    if end not in (lo, hi):
        raise InvalidParameter(f"end {end:g} is not an endpoint of the domain ({lo:g}, {hi:g})")
    return end


def default_start(spec, end):
    lo, hi = spec.domain
    if lo < 0.0 < hi:
        return 0.0
    if math.isfinite(lo) and math.isfinite(hi):
        return 0.5 * (lo + hi)
    return lo + 1.0 if math.isfinite(lo) else hi - 1.0


# ---------------------------------------------------------------------------
# Symbolic substitution: every end becomes +inf in a new variable y
# ---------------------------------------------------------------------------


def _subst(node, repl):
    if isinstance(node, Var):
        return repl
    if isinstance(node, Const):
        return node
    if isinstance(node, Binary):
        return Binary(node.op, _subst(node.left, repl), _subst(node.right, repl))
    if isinstance(node, Neg):
        return Neg(_subst(node.arg, repl))
    if isinstance(node, Func):
        return Func(node.name, _subst(node.arg, repl))
    return None  # piecewise glue is left to quadrature


def _integrand_asymptotic(spec, end, k):
    """Asymptotic form of ``a^k`` in the variable ``y -> +inf`` that maps to ``end``."""
    if math.isinf(end):
        key = "+inf" if end > 0 else "-inf"
        a = spec.asymptotic_exponents.get(key)
        return None if a is None else a.raised(k)
    if isinstance(spec.tree, Piecewise):
        return None
    # x = end -+ 1/y, dx = dy / y^2
    inv = Binary("/", Const(1.0), Var())
    repl = Binary("-", Const(end), inv) if end == spec.domain[1] else Binary("+", Const(end), inv)
    sub = _subst(spec.tree, repl)
    if sub is None:
        return None
    a = asymptotic(sub, math.inf)
    if a is None:
        return None
    a = a.raised(k)
    if a is None:
        return None
    return a.times(type(a)(1.0, -2.0))


def _rule(a):
    """finite / infinite / None for ``int^inf a(y) dy`` from an asymptotic form."""
    if a.coef <= 0:
        raise NonpositiveIntegrand("integrand is not positive near the end")
    if a.rate != 0:
        return "finite" if a.rate < 0 else "infinite"
    if a.stretch != 0:
        return "finite" if a.stretch < 0 else "infinite"
    if not a.exact:
        return None
    if a.power != -1.0:
        return "finite" if a.power < -1.0 else "infinite"
    return "finite" if a.logpow < -1.0 else "infinite"


# ---------------------------------------------------------------------------
# Numerics
# ---------------------------------------------------------------------------


def _mapped(spec, end, k, start):
    """Integrand g(y) on [y0, inf) equivalent to int_start^end a^k."""
    lo, hi = spec.domain
    if math.isinf(end):
        s = 1.0 if end > 0 else -1.0

        def g(y):
            with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
                return spec(s * np.asarray(y, dtype=float)) ** k

        return g, s * start
    if end == hi:

        def g(y):
            y = np.asarray(y, dtype=float)
            with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
                return spec(end - 1.0 / y) ** k / (y * y)

        return g, 1.0 / (end - start)

    def g(y):
        y = np.asarray(y, dtype=float)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            return spec(end + 1.0 / y) ** k / (y * y)

    return g, 1.0 / (start - end)


def _quad(g, a, b, tol):
    # accuracy is judged from the returned error estimate, not from warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(lambda y: float(g(y)), a, b, epsabs=tol * 1e-3, epsrel=1e-12, limit=500)
    return val, err


def _tail_blocks(g, y0, tol, max_blocks=1100, plateau=48):
    """Block-doubling integration of a positive integrand on ``[y0, inf)``.

    Blocks ``[X 2^j, X 2^(j+1)]`` are integrated one by one. The integrand must
    be eventually monotone (checked on samples inside each block). A
    non-decreasing positive tail diverges. A decreasing tail whose block
    integrals shrink by a stable ratio ``q < 1`` has remainder at most
    ``T_j q / (1 - q)``. Block integrals that stop shrinking over a span of
    ``2^plateau`` in ``y`` count as divergence; shorter plateaus (a slowly
    decaying exponential, say) are integrated through. ``tol`` is absolute
    for values up to 1 and relative beyond.
    Returns ``(status, value, remainder, detail)``.
    """
    X = max(1.0, y0 + 1.0)
    total, err = _quad(g, y0, X, tol) if X > y0 else (0.0, 0.0)
    if not math.isfinite(total):
        return "infinite", None, None, "integrand not integrable before the tail"
    blocks = []
    ratios = []
    a = X
    for _ in range(max_blocks):
        b = 2.0 * a
        ys = np.linspace(a, b, 33)
        vals = g(ys)
        if np.any(np.isnan(vals)):
            return "undetermined", None, None, f"integrand undefined near y = {a:g}"
        if not math.isfinite(b):
            break
        if np.any(vals < 0):
            raise NonpositiveIntegrand("integrand is not positive near the end")
        if np.any(vals == 0):
            if blocks and vals[0] < 1e-300:
                return "undetermined", None, None, f"integrand underflows near y = {a:g} before a tail bound"
            raise NonpositiveIntegrand("integrand is not positive near the end")
        if np.any(np.isinf(vals)):
            return "infinite", None, None, f"integrand overflows near y = {a:g}"
        diffs = np.diff(vals)
        slack = 1e-12 * np.abs(vals[1:])
        rising = np.all(diffs >= -slack)
        falling = np.all(diffs <= slack)
        if rising and (blocks or not falling):
            return "infinite", None, None, f"positive integrand non-decreasing beyond y = {a:g}"
        if not falling:
            a = b
            blocks.append(_quad(g, ys[0], b, tol)[0])
            total += blocks[-1]
            continue
        T, e = _quad(g, a, b, tol)
        err += e
        total += T
        if blocks and blocks[-1] > 0:
            ratios.append(T / blocks[-1])
        blocks.append(T)
        a = b
        if T == 0.0:
            return "finite", total, err, "integrand underflows"
        if len(ratios) >= plateau and min(ratios[-plateau:]) >= 1.0 - 1e-9:
            return "infinite", None, None, "block integrals do not decrease"
        if len(ratios) >= 4:
            recent = ratios[-4:]
            q = max(recent)
            stable = max(recent) - min(recent) <= 0.05 * max(recent) or q < 0.5
            if q < 1.0 - 1e-3 and stable:
                tail = T * q / (1.0 - q)
                if tail + err < tol * max(1.0, total):
                    return "finite", total + tail, tail + err, f"geometric block ratio {q:.4g}"
        if not math.isfinite(total):
            return "infinite", None, None, "partial integrals overflow"
    return "undetermined", None, None, "tail bound not reached within the block budget"


def integral_converges(spec, transform="identity", end="omega", tol=1e-8, start=None, method="auto"):
    """Decide whether ``int_start^end f(a(t)) dt`` is finite.

    ``transform`` selects ``f(a) = a`` (identity), ``1/a`` (reciprocal) or
    ``1/a^2`` (reciprocal_square). Symbolic asymptotics decide first; if the
    leading form is unknown (or ``method='quadrature_with_tail_bound'``) a
    block-doubling quadrature with a monotone tail bound decides.
    """
    if not isinstance(spec, ScaleFactorSpec):
        raise InvalidParameter("spec must be a ScaleFactorSpec")
    if transform not in TRANSFORMS:
        raise InvalidParameter(f"unknown transform {transform!r}; expected one of {sorted(TRANSFORMS)}")
    if tol <= 0:
        raise InvalidParameter("tol must be positive")
    if method not in ("auto", "asymptotic_rule", "quadrature_with_tail_bound"):
        raise InvalidParameter(f"unknown method {method!r}")
    end = resolve_end(spec, end)
    start = default_start(spec, end) if start is None else float(start)
    lo, hi = spec.domain
    if not lo < start < hi:
        raise InvalidParameter(f"start {start:g} is not inside the domain")
    k = TRANSFORMS[transform]
    g, y0 = _mapped(spec, end, k, start)

    if method != "quadrature_with_tail_bound":
        a = _integrand_asymptotic(spec, end, k)
        status = _rule(a) if a is not None else None
        if status is not None:
            if status == "infinite":
                return ConvergenceVerdict("infinite", "asymptotic_rule", start=start, end=end)
            with np.errstate(all="ignore"):
                val, err = _quad(g, y0, math.inf, tol)
            detail = ""
            if not (math.isfinite(val) and err < tol):
                qs, qv, qr, _ = _tail_blocks(g, y0, tol)
                if qs == "finite":
                    val, err = qv, qr
                else:
                    val, err, detail = None, None, "value not certified within tolerance"
            return ConvergenceVerdict("finite", "asymptotic_rule", val, err, start, end, detail)
        if method == "asymptotic_rule":
            return ConvergenceVerdict("undetermined", "asymptotic_rule", start=start, end=end,
                                      detail="leading asymptotic form unavailable")
    status, val, rem, detail = _tail_blocks(g, y0, tol)
    return ConvergenceVerdict(status, "quadrature_with_tail_bound", val, rem, start, end, detail)


def require_decided(verdict, what):
    if verdict.status == "undetermined":
        raise Undetermined(f"could not decide convergence of {what}: {verdict.detail}")
    return verdict
