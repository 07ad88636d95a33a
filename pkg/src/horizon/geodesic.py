"""Geodesic distance fields on metric grids, plus a Clairaut-integral oracle.

Two lattice engines share one compiled march:

``"graph"``
    Exact single-source shortest paths on the stencil graph. Distances are
    symmetric and satisfy the triangle inequality exactly, which the causal
    grids rely on. Their error against the surface metric does not shrink
    with the spacing: it is a fixed directional bias bounded by
    ``grid.error_bound``.
``"eikonal"`` (default)
    The same label-setting order, with every tentative value also offered the
    first-order simplex update across neighbouring stencil edges. Errors shrink
    linearly with the spacing. Values remain 1-Lipschitz along edges, but
    exchanging source and target is only symmetric up to discretization error.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import _kernels
from .errors import InvalidParameter, NoConvergence, OutOfDomain
from .surfaces import FlatPlane, MetricGrid, RotationalCover, WarpedProduct

METHODS = ("eikonal", "graph")


@dataclass(frozen=True, eq=False)
class DistanceField:
    """Distances from ``source`` to every node of ``grid`` (flat node order)."""

    grid: MetricGrid
    source: int
    values: np.ndarray = field(repr=False)
    method: str = "eikonal"

    @property
    def error_bound(self):
        return self.grid.error_bound

    def __getitem__(self, node):
        return float(self.values[node])

    def as_array(self):
        """Values reshaped to ``grid.shape`` (rows are v)."""
        return self.values.reshape(self.grid.shape)

    def shifted(self, constant):
        return DistanceField(self.grid, self.source, self.values + constant, self.method)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["u", "v", "distance"])
        U, V = self.grid.node_coords()
        for u, v, d in zip(U.ravel(), V.ravel(), self.values):
            w.writerow([repr(float(u)), repr(float(v)), repr(float(d))])
        return buf.getvalue()


def _check_node(grid, node):
    node = int(node)
    if not 0 <= node < grid.n_nodes:
        raise OutOfDomain(f"node {node} is not in the grid (0..{grid.n_nodes - 1})")
    return node


def _march(grid, sources, values, method, target=-1):
    if method not in METHODS:
        raise InvalidParameter(f"unknown distance method {method!r}; expected one of {METHODS}")
    nv, nu = grid.shape
    hu, hv = grid.spacing
    dist, _ = _kernels.march(
        nu,
        nv,
        grid.periodic,
        float(hu),
        float(hv),
        np.ascontiguousarray(grid.half_row_scale, dtype=np.float64),
        grid.offsets,
        method == "eikonal",
        np.asarray(sources, dtype=np.int64),
        np.asarray(values, dtype=np.float64),
        int(target),
    )
    return dist


SEED_CELLS = 3.0  # radius of the frozen-metric patch, in cell diameters
SEED_RADIUS = 0.15  # radius of the refined seed patch, in metric length
SEED_REFINE = 4


def _frozen_patch(nu, nv, periodic, hu, hv, half_scale, iu0, iv0, radius):
    """Nodes within ``radius`` of ``(iu0, iv0)`` under the metric frozen at mid rows."""
    nodes, vals = [], []
    kv = int(radius / hv)
    for dv in range(-kv, kv + 1):
        iv = iv0 + dv
        if not 0 <= iv < nv:
            continue
        scale = half_scale[iv0 + iv]
        ku = int(radius / (scale * hu))
        if periodic:
            ku = min(ku, nu // 2 - 1)
        for du in range(-ku, ku + 1):
            d = math.hypot(scale * du * hu, dv * hv)
            if d > radius:
                continue
            iu = iu0 + du
            if periodic:
                iu %= nu
            elif not 0 <= iu < nu:
                continue
            nodes.append(iv * nu + iu)
            vals.append(d)
    return nodes, vals


def _seeds(grid, source, method):
    """Initial values for the march.

    A point source is where first-order marching loses the most accuracy (the
    error picks up a ``log(1/h)`` factor). The eikonal engine therefore solves
    a ball of fixed metric radius around the source on a locally refined
    lattice and seeds the coarse march with those values.
    """
    if method != "eikonal":
        return [source], [0.0]
    iu0, iv0 = grid.index(source)
    nv, nu = grid.shape
    hu, hv = grid.spacing
    surface = grid.surface
    radius = max(SEED_RADIUS, SEED_CELLS * max(hv, grid.row_scale[iv0] * hu))
    F = SEED_REFINE
    # local window in coarse steps, large enough to contain the metric ball
    kv = int(math.ceil(1.2 * radius / hv))
    jv0, jv1 = max(0, iv0 - kv), min(nv - 1, iv0 + kv)
    smin = float(np.min(grid.half_row_scale[2 * jv0 : 2 * jv1 + 1]))
    ku = int(math.ceil(1.2 * radius / (smin * hu)))
    if grid.periodic and 2 * ku + 1 >= nu:
        return _frozen_patch(nu, nv, True, hu, hv, grid.half_row_scale, iu0, iv0, SEED_CELLS * max(hv, grid.row_scale[iv0] * hu))
    ju0, ju1 = iu0 - ku, iu0 + ku
    if not grid.periodic:
        ju0, ju1 = max(0, ju0), min(nu - 1, ju1)
    fnu = (ju1 - ju0) * F + 1
    fnv = (jv1 - jv0) * F + 1
    fhu, fhv = hu / F, hv / F
    vs = grid.v[0] + jv0 * hv + 0.5 * fhv * np.arange(2 * fnv - 1)
    fscale = np.sqrt(surface.g_uu(vs))
    fiu, fiv = (iu0 - ju0) * F, (iv0 - jv0) * F
    fn, fv = _frozen_patch(fnu, fnv, False, fhu, fhv, fscale, fiu, fiv, SEED_CELLS * max(fhv, fscale[2 * fiv] * fhu))
    dist, _ = _kernels.march(
        fnu, fnv, False, fhu, fhv, fscale, grid.offsets, True,
        np.asarray(fn, dtype=np.int64), np.asarray(fv, dtype=np.float64), -1,
    )
    fine = dist.reshape(fnv, fnu)[::F, ::F]
    nodes, vals = [], []
    for a in range(fine.shape[0]):
        for b in range(fine.shape[1]):
            d = fine[a, b]
            if d <= radius:
                nodes.append((jv0 + a) * nu + (ju0 + b) % nu)
                vals.append(float(d))
    return nodes, vals


def distance_field(grid, source, method="eikonal"):
    """Distances from node ``source`` to all nodes of ``grid``."""
    source = _check_node(grid, source)
    nodes, vals = _seeds(grid, source, method)
    return DistanceField(grid, source, _march(grid, nodes, vals, method), method)


def pairwise_distance(grid, p, q, method="eikonal"):
    """Distance from ``p`` to ``q``; stops as soon as ``q`` is settled.

    The march visits nodes in the same order as :func:`distance_field`, so the
    result equals ``distance_field(grid, p).values[q]`` bit for bit.
    """
    p, q = _check_node(grid, p), _check_node(grid, q)
    if p == q:
        return 0.0
    nodes, vals = _seeds(grid, p, method)
    return float(_march(grid, nodes, vals, method, target=q)[q])


def probe_threads():
    """Worker count for independent fields, capped by ``HORIZON_PROBE_THREADS``."""
    raw = os.environ.get("HORIZON_PROBE_THREADS")
    cap = os.cpu_count() or 1
    if raw:
        try:
            cap = max(1, int(raw))
        except ValueError:
            raise InvalidParameter(f"HORIZON_PROBE_THREADS must be an integer, got {raw!r}") from None
    return cap


def distance_fields(grid, sources, method="eikonal"):
    """Fields for many sources; computed concurrently (the kernel releases the GIL)."""
    sources = [_check_node(grid, s) for s in sources]
    workers = min(probe_threads(), max(1, len(sources)))
    if workers == 1 or len(sources) < 2:
        return [distance_field(grid, s, method) for s in sources]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: distance_field(grid, s, method), sources))


# --------------------------------------------------------------------------
# Clairaut oracle
# --------------------------------------------------------------------------


_GX, _GW = np.polynomial.legendre.leggauss(16)


def _graded_panels(a, b, depth=44):
    """Panel edges on ``[a, b]`` refined geometrically toward both ends."""
    if b <= a:
        return np.array([a, b])
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    steps = half * 0.5 ** np.arange(1, depth)
    left = a + steps[::-1]
    right = b - steps
    return np.concatenate([[a], left, [mid], right, [b]])


def _gauss(f, edges_list):
    """Composite 16-point Gauss-Legendre over consecutive panel edges."""
    edges = np.concatenate(edges_list)
    lo, hi = edges[:-1], edges[1:]
    keep = hi > lo
    lo, hi = lo[keep], hi[keep]
    half = 0.5 * (hi - lo)
    x = (lo + half)[:, None] + half[:, None] * _GX
    return float(np.sum(half[:, None] * _GW * f(x)))


class _Meridian:
    """Integrals along the meridian of a chart-diagonal surface of revolution.

    Endpoint singularities of the Clairaut integrands are handled by graded
    panels; turning-point integrals use the substitution ``s = star +- t^2``.
    """

    def __init__(self, surface):
        rho, weight, to_sigma, breaks = surface.meridian()
        self.rho, self.weight, self.to_sigma = rho, weight, to_sigma
        self.breaks = np.array(sorted(breaks), dtype=float)
        lo, hi = surface.v_domain
        if isinstance(surface, RotationalCover):
            # turning points need rho' != 0, which only happens on the bulge
            self.turn_window = (-1.0, 1.0)
        else:
            self.turn_window = (lo, hi)

    def drho(self, s):
        h = 1e-7
        return (self.rho(s + h) - self.rho(s - h)) / (2 * h)

    def _pieces(self, a, b):
        cuts = [a] + [x for x in self.breaks if a < x < b] + [b]
        return [_graded_panels(x, y) for x, y in zip(cuts[:-1], cuts[1:])]

    def direct(self, c, s1, s2):
        """(du, length) of the branch without turning points."""
        lo, hi = min(s1, s2), max(s1, s2)
        if lo == hi:
            return 0.0, 0.0
        c2 = c * c

        def both(s):
            r = self.rho(s)
            root = np.sqrt(np.maximum(r * r - c2, 1e-300))
            return self.weight(s) / root, r

        pieces = self._pieces(lo, hi)
        du = _gauss(lambda s: c * both(s)[0] / both(s)[1], pieces)
        ln = _gauss(lambda s: both(s)[0] * both(s)[1], pieces)
        return du, ln

    def _from_turn(self, star, end, c):
        """Integrals from a turning point ``star`` (rho(star) = |c|) to ``end``."""
        sgn = 1.0 if end >= star else -1.0
        top = math.sqrt(abs(end - star))
        if top == 0:
            return 0.0, 0.0
        rc = abs(c)
        slope = abs(float(self.drho(star)))

        def parts(t):
            s = star + sgn * t * t
            r = self.rho(s)
            g = (r - rc) * (r + rc)
            g = np.where(g > 0, g, np.maximum(slope * t * t * (r + rc), 1e-300))
            return 2 * t * self.weight(s) / np.sqrt(g), r

        cuts = [0.0] + sorted(math.sqrt(abs(b - star)) for b in self.breaks if min(star, end) < b < max(star, end)) + [top]
        pieces = [_graded_panels(x, y) for x, y in zip(cuts[:-1], cuts[1:])]

        def du(t):
            q, r = parts(t)
            return c * q / r

        def ds(t):
            q, r = parts(t)
            return q * r

        return _gauss(du, pieces), _gauss(ds, pieces)

    def spiral_limit(self, star, s1, s2, du):
        r0 = float(self.rho(star))

        def f(s):
            r = self.rho(s)
            return self.weight(s) * np.sqrt(np.maximum(r * r - r0 * r0, 0.0)) / r

        total = r0 * du
        for end in (s1, s2):
            total += _gauss(f, self._pieces(min(star, end), max(star, end)))
        return total

    def turning(self, star, s1, s2, sign):
        c = sign * float(self.rho(star))
        a1, l1 = self._from_turn(star, s1, c)
        a2, l2 = self._from_turn(star, s2, c)
        return a1 + a2, l1 + l2


# relative turning depths: dense next to the endpoint and next to the far limit
_TURN_STEPS = np.unique(np.concatenate([np.geomspace(1e-10, 0.5, 60), 1 - np.geomspace(1e-12, 0.5, 60)]))


def _turn_candidates(mer, s1, s2, target, side):
    """Lengths of geodesics with one turning point beyond ``s1, s2`` on ``side``."""
    lo_w, hi_w = mer.turn_window
    if side < 0:
        near = min(s1, s2)
        far = max(lo_w, near - 20.0)
        if not far < near:
            return []
        grid = near - (near - far) * _TURN_STEPS
    else:
        near = max(s1, s2)
        far = min(hi_w, near + 20.0)
        if not near < far:
            return []
        grid = near + (far - near) * _TURN_STEPS
    grid = grid[np.isfinite(grid)]
    lo, hi = min(s1, s2), max(s1, s2)
    out = []
    for sign in (1.0, -1.0):
        if target * sign <= 0:
            continue
        vals = []
        for star in grid:
            r = float(mer.rho(star))
            seg = np.linspace(min(star, lo), max(star, hi), 64)[1:-1]
            if abs(float(mer.drho(star))) < 1e-9 or np.any(mer.rho(seg) <= r):
                vals.append(np.nan)
                continue
            vals.append(mer.turning(star, s1, s2, sign)[0] - target)
        vals = np.array(vals)
        for i in range(len(grid) - 1):
            a, b = vals[i], vals[i + 1]
            if not (np.isfinite(a) and np.isfinite(b)) or a * b > 0:
                continue
            star = optimize.brentq(
                lambda x: mer.turning(x, s1, s2, sign)[0] - target, grid[i], grid[i + 1], xtol=1e-14, rtol=1e-13
            )
            out.append(mer.turning(star, s1, s2, sign)[1])
        reach = vals[np.isfinite(vals)]
        if (
            len(reach)
            and np.all(sign * (reach + target) < abs(target))
            and abs(float(mer.drho(far))) < 1e-5
        ):
            # The angular span diverges (logarithmically) as the turning point
            # approaches a closed geodesic at ``far``; lengths converge to the
            # spiral limit rho0*|du| + sum of the radial integrals.
            out.append(mer.spiral_limit(far, s1, s2, abs(target)))
    return out


def _one_target(mer, s1, s2, target):
    cands = []
    if abs(s2 - s1) < 1e-15:
        cands.append(abs(target) * float(mer.rho(s1)))
    else:
        seg = np.linspace(min(s1, s2), max(s1, s2), 513)
        m = float(np.min(mer.rho(seg)))
        edge = m * (1 - 1e-12)
        if target == 0:
            cands.append(mer.direct(0.0, s1, s2)[1])
        else:
            f = lambda c: mer.direct(c, s1, s2)[0] - target
            fe = f(math.copysign(edge, target))
            if fe * target >= 0:
                c = optimize.brentq(f, 0.0, math.copysign(edge, target), xtol=1e-15, rtol=1e-14)
                cands.append(mer.direct(c, s1, s2)[1])
    if target != 0:
        for side in (-1, 1):
            cands.extend(_turn_candidates(mer, s1, s2, target, side))
    return min(cands) if cands else math.inf


def clairaut_distance(surface, p, q, tol=1e-8):
    """Length of the shortest Clairaut geodesic between chart points ``p`` and ``q``.

    Geodesics are found by shooting on the Clairaut constant ``c = rho^2 du/ds``:
    the branch without turning points is solved by bisection on ``c`` (its
    angular span is monotone in ``c``); branches with one turning point are
    scanned over the turning position. On wrapped surfaces windings
    ``k in {0, +-1, +-2}`` are tried. Points are ``(u, v)`` in the surface chart.
    """
    if tol <= 0:
        raise InvalidParameter("tol must be positive")
    if isinstance(surface, FlatPlane):
        return math.hypot(q[0] - p[0], q[1] - p[1])
    if not isinstance(surface, (RotationalCover, WarpedProduct)):
        raise InvalidParameter(f"Clairaut oracle needs a surface of revolution, got {surface!r}")
    lo, hi = surface.v_domain
    for pt in (p, q):
        if not lo < pt[1] < hi:
            raise OutOfDomain(f"point {pt!r} is outside the chart domain")
    mer = _Meridian(surface)
    s1 = float(mer.to_sigma(float(p[1])))
    s2 = float(mer.to_sigma(float(q[1])))
    du = float(q[0]) - float(p[0])
    windings = (0,) if surface.u_period is None else (0, 1, -1, 2, -2)
    best = math.inf
    for k in windings:
        target = du + k * (surface.u_period or 0.0)
        best = min(best, _one_target(mer, s1, s2, target))
    if not math.isfinite(best):
        raise NoConvergence("shooting did not bracket a connecting geodesic")
    return best
