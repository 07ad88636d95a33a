"""Busemann functions, normalized distance functions and the ends count.

Conventions
-----------
A :class:`GromovPoint` holds ``x -> d(p, x) - d(p, base)`` on a finite probe
set, i.e. a distance function modulo constants. Horofunctions arise as limits
of these along escaping sequences.

A Busemann truncation is ``t_k - d(x, c(t_k))``. Its normalized negative
``-(b(x) - b(base))`` lives in the same space as the Gromov points (it is the
limit of ``j(c(t_k))``), so :attr:`BusemannSample.limit` uses that sign and
can be compared with Gromov limits directly. :attr:`BusemannSample.busemann`
keeps the original sign.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np
from scipy import ndimage

from ._integrals import default_start, integral_converges, resolve_end
from .errors import (
    HypothesisViolated,
    InsufficientData,
    InvalidParameter,
    MismatchedProbe,
    NoCauchySubsequence,
    NotStabilized,
    NotUnitSpeed,
    OutOfDomain,
    Undetermined,
)
from .expr import ScaleFactorSpec
from .geodesic import distance_field, distance_fields, pairwise_distance

MANIFOLD_K = "ManifoldK"
POINT = "Point"


# --------------------------------------------------------------------------
# Probe sets and Gromov points
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ProbeSet:
    """Finite set of grid nodes with a basepoint and positive weights summing to 1."""

    grid: object
    points: tuple
    basepoint: int
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        pts = tuple(int(p) for p in self.points)
        object.__setattr__(self, "points", pts)
        if len(set(pts)) != len(pts):
            raise InvalidParameter("probe points must be distinct")
        if int(self.basepoint) not in pts:
            raise InvalidParameter("basepoint must be one of the probe points")
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (len(pts),) or not np.all(w > 0):
            raise InvalidParameter("need one positive weight per probe point")
        if abs(w.sum() - 1.0) > 1e-12:
            raise InvalidParameter(f"probe weights must sum to 1, got {w.sum()!r}")
        for p in pts:
            if not 0 <= p < self.grid.n_nodes:
                raise OutOfDomain(f"probe node {p} is not in the grid")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "basepoint", int(self.basepoint))

    @property
    def base_index(self):
        return self.points.index(self.basepoint)

    @property
    def relative_weights(self):
        return self.weights / self.weights.max()

    def same_as(self, other):
        return self is other or (
            self.grid is other.grid
            and self.points == other.points
            and self.basepoint == other.basepoint
            and np.array_equal(self.weights, other.weights)
        )

    def with_basepoint(self, node):
        return ProbeSet(self.grid, self.points, int(node), self.weights)


def make_probe_set(grid, points, basepoint=None, weights=None):
    """Probe set from nodes; the basepoint defaults to the first point, weights to uniform."""
    pts = [int(p) for p in points]
    if not pts:
        raise InvalidParameter("probe set is empty")
    base = pts[0] if basepoint is None else int(basepoint)
    if base not in pts:
        pts.insert(0, base)
    if weights is None:
        weights = np.full(len(pts), 1.0 / len(pts))
    else:
        weights = np.asarray(weights, dtype=float)
        weights = weights / weights.sum()
    return ProbeSet(grid, tuple(pts), base, weights)


def ball_probes(grid, center, radius, count, seed=0, method="eikonal"):
    """``count`` probe nodes within metric distance ``radius`` of ``center`` (the basepoint)."""
    center = int(center)
    d = distance_field(grid, center, method).values
    inside = np.flatnonzero(d <= radius)
    inside = inside[inside != center]
    if len(inside) < count - 1:
        raise InvalidParameter(f"only {len(inside) + 1} nodes within radius {radius:g}")
    rng = np.random.default_rng(seed)
    pick = np.sort(rng.choice(inside, size=count - 1, replace=False))
    return make_probe_set(grid, [center, *pick.tolist()])


@dataclass(frozen=True, eq=False)
class GromovPoint:
    """A function on the probe set, normalized so it vanishes at the basepoint."""

    probe: ProbeSet
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.probe.points),):
            raise MismatchedProbe("values do not match the probe set")
        object.__setattr__(self, "values", v)

    def rebased(self, node):
        """Same class modulo constants, normalized at another probe point."""
        probe = self.probe.with_basepoint(node)
        return GromovPoint(probe, self.values - self.values[probe.base_index])

    def as_dict(self):
        return dict(zip(self.probe.points, self.values.tolist()))


def _normalized(probe, raw):
    raw = np.asarray(raw, dtype=float)
    return GromovPoint(probe, raw - raw[probe.base_index])


def gromov_embed(field, probe):
    """``j(x) = d(x, .) - d(x, base)`` restricted to the probes, from a field sourced at ``x``."""
    if field.grid is not probe.grid and field.grid.shape != probe.grid.shape:
        raise MismatchedProbe("probe set belongs to a different grid")
    return _normalized(probe, field.values[list(probe.points)])


def quotient_distance(a, b, exact=False):
    """Weighted sup distance ``max_x (w_x / max w) |a(x) - b(x)|``.

    With ``exact=True`` the value is a :class:`fractions.Fraction` computed
    without rounding from the stored floats.
    """
    if not a.probe.same_as(b.probe):
        raise MismatchedProbe("Gromov points live on different probe sets")
    if exact:
        w = a.probe.relative_weights
        return max(
            Fraction(float(wi)) * abs(Fraction(float(x)) - Fraction(float(y)))
            for wi, x, y in zip(w, a.values, b.values)
        )
    return float(np.max(a.probe.relative_weights * np.abs(a.values - b.values)))


def probe_fields(probe, method="eikonal"):
    """Distance fields sourced at every probe point (computed concurrently)."""
    return distance_fields(probe.grid, probe.points, method)


def _probe_matrix(fields, nodes):
    """``D[i, k] = d(probe_i, nodes[k])`` from fields sourced at the probes."""
    idx = np.asarray(nodes, dtype=np.int64)
    return np.vstack([f.values[idx] for f in fields])


def embed_via_probes(fields, probe, node):
    """``j(node)`` read off probe-sourced fields (distances are symmetric)."""
    return _normalized(probe, _probe_matrix(fields, [node])[:, 0])


# --------------------------------------------------------------------------
# Busemann truncations
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DiscreteCurve:
    """Curve samples: strictly increasing parameters and grid nodes."""

    params: np.ndarray
    nodes: np.ndarray
    label: str = ""

    def __post_init__(self):
        t = np.asarray(self.params, dtype=float)
        n = np.asarray(self.nodes, dtype=np.int64)
        if t.ndim != 1 or t.shape != n.shape or len(t) < 2:
            raise InvalidParameter("curve needs matching parameter and node lists of length >= 2")
        if not np.all(np.diff(t) > 0):
            raise InvalidParameter("curve parameters must be strictly increasing")
        object.__setattr__(self, "params", t)
        object.__setattr__(self, "nodes", n)

    def __len__(self):
        return len(self.params)


def _segment_length(grid, p, q, pieces=64):
    """Metric length of the straight chart segment between nodes ``p`` and ``q``."""
    (u0, v0), (u1, v1) = grid.coords(p), grid.coords(q)
    du = u1 - u0
    if grid.periodic:
        per = grid.surface.u_period
        du = (du + 0.5 * per) % per - 0.5 * per
    s = (np.arange(pieces) + 0.5) / pieces
    scale = np.sqrt(grid.surface.g_uu(v0 + s * (v1 - v0)))
    return float(np.sum(np.hypot(scale * du, v1 - v0)) / pieces)


def lattice_ray(grid, start, step, count, label=""):
    """Curve through ``start + k * step`` (lattice index offsets), ``k = 0..count-1``.

    Parameters are metric lengths of the chart polyline through the samples,
    so the curve is unit-speed-or-lower.
    """
    iu, iv = grid.index(start)
    nv, nu = grid.shape
    nodes = []
    for k in range(count):
        ju, jv = iu + k * step[0], iv + k * step[1]
        if grid.periodic:
            ju %= nu
        if not (0 <= ju < nu and 0 <= jv < nv):
            raise OutOfDomain(f"lattice ray leaves the grid after {k} samples")
        nodes.append(grid.node(ju, jv))
    t = np.concatenate([[0.0], np.cumsum([_segment_length(grid, a, b) for a, b in zip(nodes[:-1], nodes[1:])])])
    return DiscreteCurve(t, np.array(nodes), label)


@dataclass(frozen=True, eq=False)
class BusemannSample:
    """Truncated Busemann values ``t_k - d(x, c(t_k))`` (rows: probes, columns: samples)."""

    curve: DiscreteCurve
    probe: ProbeSet
    truncations: np.ndarray = field(repr=False)
    status: str = "undetermined"
    limit: GromovPoint | None = None
    lower_slope: float | None = None
    final_increment: float | None = None
    error_bound: float = 0.0

    @property
    def busemann(self):
        """Normalized final truncation row ``b(x) - b(base)``."""
        row = self.truncations[:, -1]
        return row - row[self.probe.base_index]

    def increments(self):
        return np.diff(self.truncations, axis=1)

    def monotonicity_defect(self):
        """Largest decrease of a truncation between consecutive samples (0 if monotone)."""
        return float(max(0.0, -np.min(self.increments())))


def busemann_truncations(grid, curve, probe, method="eikonal", fields=None, speed_slack=None):
    """Fill the truncation matrix of ``curve`` on ``probe``.

    ``fields`` may supply precomputed probe-sourced distance fields. The
    unit-speed-or-lower condition is checked between consecutive samples,
    allowing the lattice error bound as slack.
    """
    if probe.grid is not grid:
        raise MismatchedProbe("probe set belongs to a different grid")
    for n in curve.nodes:
        if not 0 <= n < grid.n_nodes:
            raise OutOfDomain(f"curve node {n} is not in the grid")
    eb = grid.error_bound
    slack = eb if speed_slack is None else speed_slack
    dt = np.diff(curve.params)
    for k, (a, b) in enumerate(zip(curve.nodes[:-1], curve.nodes[1:])):
        d = pairwise_distance(grid, int(a), int(b), method)
        if d > dt[k] * (1.0 + slack) + 1e-12:
            raise NotUnitSpeed(f"curve moves {d:.6g} in parameter time {dt[k]:.6g} at sample {k}")
    if fields is None:
        if len(curve) < len(probe.points):
            cf = distance_fields(grid, curve.nodes, method)
            D = np.vstack([f.values[list(probe.points)] for f in cf]).T
        else:
            D = _probe_matrix(probe_fields(probe, method), curve.nodes)
    else:
        D = _probe_matrix(fields, curve.nodes)
    trunc = curve.params[None, :] - D
    return BusemannSample(curve, probe, trunc, error_bound=eb)


def busemann_limit(sample, tol, window=3):
    """Classify a truncation sample.

    ``converged`` when every probe's last ``window`` increments are below
    ``tol`` in absolute value; the limit is then the normalized final row.
    Truncations are non-decreasing, so divergence can only be to ``+inf``; a
    finite horizon cannot certify it, and such samples are reported
    ``undetermined`` with their ``lower_slope`` (smallest average slope over
    the final window). Returns an updated :class:`BusemannSample`.
    """
    if window < 1:
        raise InvalidParameter("window must be at least 1")
    K = len(sample.curve)
    if K - 1 < 2 * window:
        raise InsufficientData(f"need at least {2 * window} truncation steps, have {K - 1}")
    tr = sample.truncations
    inc = np.diff(tr, axis=1)[:, -window:]
    t = sample.curve.params
    slope = (tr[:, -1] - tr[:, -1 - window]) / (t[-1] - t[-1 - window])
    final = float(np.max(np.abs(inc)))
    bounded = bool(np.all(np.isfinite(tr)))
    if bounded and final < tol:
        return replace(
            sample,
            status="converged",
            limit=_normalized(sample.probe, -tr[:, -1]),
            lower_slope=float(np.min(slope)),
            final_increment=final,
        )
    return replace(sample, status="undetermined", limit=None, lower_slope=float(np.min(slope)), final_increment=final)


# --------------------------------------------------------------------------
# Coincidence of Busemann and Gromov boundaries
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SequenceTrace:
    index: int
    increments: tuple
    cauchy: bool


@dataclass(frozen=True)
class Match:
    sequence: int
    min_distance: float
    curve: int | None  # nearest converged curve when within tolerance


@dataclass(frozen=True, eq=False)
class CoincidenceReport:
    """Gromov limits of escaping sequences against a family of Busemann limits.

    The verdict is evidence at probe and horizon resolution; ``evidence_only``
    is always true and ``vacuous_family`` flags an empty converged family.
    """

    gromov_limits: list
    busemann_family: list
    matches: list
    verdict: str
    tol: float
    separation: float
    sequences: list
    curves: list
    family_indices: list
    vacuous_family: bool
    evidence_only: bool = True

    def summary(self):
        return {
            "verdict": self.verdict,
            "evidence_only": self.evidence_only,
            "vacuous_family": self.vacuous_family,
            "limits": len(self.gromov_limits),
            "family": len(self.busemann_family),
            "min_distances": [m.min_distance for m in self.matches],
            "separation": self.separation,
        }


def coincidence_test(grid, escape_sequences, curve_family, probe, tol, window=3, tail=2, method="eikonal", fields=None):
    """Compare Gromov limits of escaping sequences with converged Busemann limits.

    A sequence is taken as Cauchy when its last ``tail`` consecutive quotient
    distances are below ``tol``; its last element stands in for the limit.
    The verdict is ``counterexample_candidate`` iff some limit is farther than
    ``10 * tol`` from every converged Busemann limit.
    """
    if tol <= 0:
        raise InvalidParameter("tol must be positive")
    if fields is None:
        fields = probe_fields(probe, method)
    traces, limits = [], []
    for i, seq in enumerate(escape_sequences):
        pts = [embed_via_probes(fields, probe, int(n)) for n in seq]
        incs = tuple(quotient_distance(a, b) for a, b in zip(pts[:-1], pts[1:]))
        ok = len(incs) >= tail and all(x < tol for x in incs[-tail:])
        traces.append(SequenceTrace(i, incs, ok))
        if ok:
            limits.append((i, pts[-1]))
    if not limits:
        raise NoCauchySubsequence("no escape sequence stabilized in the quotient metric")
    curves, family, fam_idx = [], [], []
    for j, c in enumerate(curve_family):
        s = busemann_limit(busemann_truncations(grid, c, probe, method, fields=fields), tol, window)
        curves.append(s)
        if s.status == "converged":
            family.append(s.limit)
            fam_idx.append(j)
    matches = []
    for i, g in limits:
        if family:
            ds = [quotient_distance(g, b) for b in family]
            k = int(np.argmin(ds))
            m = ds[k]
            matches.append(Match(i, m, fam_idx[k] if m <= tol else None))
        else:
            matches.append(Match(i, math.inf, None))
    sep = 10.0 * tol
    verdict = "counterexample_candidate" if any(m.min_distance > sep for m in matches) else "coincide_on_sample"
    return CoincidenceReport(
        gromov_limits=[g for _, g in limits],
        busemann_family=family,
        matches=matches,
        verdict=verdict,
        tol=tol,
        separation=sep,
        sequences=traces,
        curves=curves,
        family_indices=fam_idx,
        vacuous_family=not family,
    )


# --------------------------------------------------------------------------
# Ends
# --------------------------------------------------------------------------


def _components(mask, periodic):
    """Labels of 8-connected components, glued across the u seam when periodic."""
    labels, n = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    if not periodic or n < 2:
        return labels, n
    parent = list(range(n + 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    left, right = labels[:, 0], labels[:, -1]
    rows = len(left)
    for r in range(rows):
        if not right[r]:
            continue
        for rr in (r - 1, r, r + 1):
            if 0 <= rr < rows and left[rr]:
                a, b = find(right[r]), find(left[rr])
                if a != b:
                    parent[a] = b
    roots = np.array([find(i) for i in range(n + 1)])
    _, relabel = np.unique(roots, return_inverse=True)
    out = relabel[labels]
    return out, int(out.max())


def ends_profile(grid, radii, basepoint=None, method="eikonal"):
    """Unbounded complementary components of ``B_R(basepoint)`` for each radius."""
    radii = [float(r) for r in radii]
    if len(radii) < 2 or any(b <= a for a, b in zip(radii[:-1], radii[1:])) or radii[0] <= 0:
        raise InvalidParameter("radii must be positive, increasing, and at least two")
    if basepoint is None:
        (u0, u1), (v0, v1) = grid.extent
        basepoint = grid.nearest_node(0.5 * (u0 + u1), 0.5 * (v0 + v1))
    d = distance_field(grid, basepoint, method).as_array()
    edge = grid.boundary_mask()
    if np.min(d[edge]) <= radii[-1]:
        raise OutOfDomain(f"ball of radius {radii[-1]:g} reaches the grid edge")
    counts = []
    for R in radii:
        labels, n = _components(d > R, grid.periodic)
        counts.append(len(set(np.unique(labels[edge])) - {0}))
    return counts


def count_ends(grid, radii, basepoint=None, method="eikonal"):
    """Stabilized number of unbounded components of the complement of large balls."""
    counts = ends_profile(grid, radii, basepoint, method)
    if counts[-1] != counts[-2]:
        raise NotStabilized(f"component counts {counts} differ on the last two radii")
    return counts[-1]


# --------------------------------------------------------------------------
# Warped products
# --------------------------------------------------------------------------


def classify_warped_boundary(warp, end="omega", split_point=None, tol=1e-8):
    """Boundary piece of ``(alpha, omega) x_a K`` at one end: ``ManifoldK`` or ``Point``.

    ``ManifoldK`` iff ``int 1/a^2`` from ``split_point`` toward ``end`` is
    finite. The warp must be monotone between ``split_point`` and the end.
    """
    if not isinstance(warp, ScaleFactorSpec):
        warp = ScaleFactorSpec(str(warp))
    e = resolve_end(warp, end)
    s = default_start(warp, e) if split_point is None else float(split_point)
    lo, hi = warp.domain
    if not lo < s < hi:
        raise InvalidParameter(f"split point {s:g} is outside the domain")
    xs = warp.sample_points()
    side = xs[xs > s] if e == hi else xs[xs < s]
    vals = warp(side)
    vals = vals[np.isfinite(vals)]
    d = np.diff(vals)
    slack = 1e-12 * np.maximum(np.abs(vals[1:]), 1.0)
    if not (np.all(d >= -slack) or np.all(d <= slack)):
        raise HypothesisViolated("warp is not monotone between the split point and the end")
    verdict = integral_converges(warp, "reciprocal_square", e, tol=tol, start=s)
    if verdict.status == "undetermined":
        raise Undetermined(f"could not decide convergence of the reciprocal-square integral: {verdict.detail}")
    return MANIFOLD_K if verdict.status == "finite" else POINT
