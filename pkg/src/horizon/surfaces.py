"""Two-dimensional Riemannian models and their lattice discretizations.

Every supported surface has a global rectangular chart ``(u, v)`` with a
diagonal metric ``g_uu(v) du^2 + dv^2``:

* :class:`FlatPlane` -- ``g_uu = 1``.
* :class:`RotationalCover` -- a surface of revolution with profile
  ``r(z)``; ``u`` is the (possibly lifted) rotation angle and ``v`` the
  arc length of the profile measured from ``z = 0``.
* :class:`WarpedProduct` -- ``dv^2 + a(v)^2 h_K`` with a circle fiber ``K``
  of given circumference.

:func:`sample_grid` turns a surface into a :class:`MetricGrid`, a
rectangular lattice whose edges carry metric lengths.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import interpolate, optimize, sparse

from .errors import InvalidParameter, OutOfDomain
from .expr import ScaleFactorSpec

TWO_PI = 2.0 * math.pi

# Gauss-Legendre rule for profile arc length on the blend zones
_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)

# Stencil offsets (du, dv), listed by increasing angle over a half turn.
_HALF_STENCIL = {
    8: [(1, 0), (1, 1), (0, 1), (-1, 1)],
    16: [(1, 0), (2, 1), (1, 1), (1, 2), (0, 1), (-1, 2), (-1, 1), (-2, 1)],
}


def stencil(order):
    """Full list of lattice offsets for an 8- or 16-neighborhood, sorted by angle."""
    if order not in _HALF_STENCIL:
        raise InvalidParameter(f"neighborhood_order must be 8 or 16, got {order!r}")
    half = _HALF_STENCIL[order]
    return np.array(half + [(-du, -dv) for du, dv in half], dtype=np.int64)


# --------------------------------------------------------------------------
# Profile curve
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ProfileCurve:
    """Grapefruit-on-a-stick profile ``r(z)``.

    Constant ``stick_radius`` for ``|z| >= 1``, the half circle
    ``sqrt((1-a)^2 - z^2)`` on ``|z| <= blend_start`` and a monotone cubic
    Hermite blend in between.
    """

    stick_radius: float
    blend_parameter: float
    blend_start: float
    resolution: int
    bulge_interval: tuple = (-1.0, 1.0)
    samples: np.ndarray = field(repr=False, compare=False, default=None)
    arclength_table: np.ndarray = field(repr=False, compare=False, default=None)

    @property
    def bulge_radius(self):
        return 1.0 - self.blend_parameter

    # -- closed-form profile -------------------------------------------------

    def _hermite(self, z):
        z0, z1 = self.blend_start, self.bulge_interval[1]
        R = self.bulge_radius
        r0 = math.sqrt(R * R - z0 * z0)
        m0 = -z0 / r0
        h = z1 - z0
        t = (z - z0) / h
        h00 = 2 * t**3 - 3 * t**2 + 1
        h10 = t**3 - 2 * t**2 + t
        h01 = -2 * t**3 + 3 * t**2
        val = h00 * r0 + h10 * h * m0 + h01 * self.stick_radius
        d00 = (6 * t**2 - 6 * t) / h
        d10 = 3 * t**2 - 4 * t + 1
        d01 = (-6 * t**2 + 6 * t) / h
        der = d00 * r0 + d10 * m0 + d01 * self.stick_radius
        return val, der

    def radius(self, z):
        """Profile radius at axial coordinate(s) ``z``."""
        z = np.asarray(z, dtype=float)
        a = np.abs(z)
        out = np.full(a.shape, self.stick_radius)
        R = self.bulge_radius
        circ = a <= self.blend_start
        out[circ] = np.sqrt(R * R - a[circ] ** 2)
        mid = (a > self.blend_start) & (a < self.bulge_interval[1])
        out[mid] = self._hermite(a[mid])[0]
        return out if out.ndim else float(out)

    def slope(self, z):
        """Derivative ``dr/dz``."""
        z = np.asarray(z, dtype=float)
        a = np.abs(z)
        out = np.zeros(a.shape)
        R = self.bulge_radius
        circ = a <= self.blend_start
        out[circ] = -a[circ] / np.sqrt(R * R - a[circ] ** 2)
        mid = (a > self.blend_start) & (a < self.bulge_interval[1])
        out[mid] = self._hermite(a[mid])[1]
        out = np.sign(z) * out
        return out if out.ndim else float(out)

    # -- arc length -------------------------------------------------------------

    def _blend_arclength(self, a):
        """Arc length from ``blend_start`` to ``a`` (``a`` inside the blend zone)."""
        z0 = self.blend_start
        half = 0.5 * (a - z0)
        nodes = z0 + half[..., None] * (_GL_X + 1.0)
        der = self._hermite(nodes)[1]
        return half * np.sum(_GL_W * np.sqrt(1.0 + der * der), axis=-1)

    @cached_property
    def _landmarks(self):
        R = self.bulge_radius
        s_b = R * math.asin(self.blend_start / R)
        s_1 = s_b + float(self._blend_arclength(np.array([self.bulge_interval[1]]))[0])
        return s_b, s_1

    def arclength(self, z):
        """Signed profile arc length from ``z = 0``."""
        z = np.asarray(z, dtype=float)
        a = np.abs(z)
        R = self.bulge_radius
        s_b, s_1 = self._landmarks
        out = np.empty(a.shape)
        circ = a <= self.blend_start
        out[circ] = R * np.arcsin(a[circ] / R)
        mid = (a > self.blend_start) & (a < 1.0)
        if np.any(mid):
            out[mid] = s_b + self._blend_arclength(a[mid])
        stick = a >= 1.0
        out[stick] = s_1 + (a[stick] - 1.0)
        out = np.sign(z) * out
        return out if out.ndim else float(out)

    @cached_property
    def _blend_inverse(self):
        zs = np.linspace(self.blend_start, 1.0, 8 * self.resolution)
        return interpolate.PchipInterpolator(self.arclength(zs), zs)

    def z_of_arclength(self, s):
        """Inverse of :meth:`arclength`."""
        s = np.asarray(s, dtype=float)
        a = np.abs(s)
        R = self.bulge_radius
        s_b, s_1 = self._landmarks
        out = np.empty(a.shape)
        circ = a <= s_b
        out[circ] = R * np.sin(a[circ] / R)
        mid = (a > s_b) & (a < s_1)
        if np.any(mid):
            z = self._blend_inverse(a[mid])
            for _ in range(3):  # Newton polish against the exact arc length
                z = z - (self.arclength(z) - a[mid]) / np.sqrt(1.0 + self.slope(z) ** 2)
                z = np.clip(z, self.blend_start, 1.0)
            out[mid] = z
        stick = a >= s_1
        out[stick] = 1.0 + (a[stick] - s_1)
        out = np.sign(s) * out
        return out if out.ndim else float(out)

    def to_csv(self):
        """Two-column ``z,r`` table of the profile samples."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["z", "r"])
        for z, r in self.samples:
            w.writerow([repr(float(z)), repr(float(r))])
        return buf.getvalue()


def _blend_start(stick, a):
    """Largest axial coordinate where a monotone cubic blend can take over.

    The half circle is kept up to the point where its slope is at most twice
    the secant slope down to ``(1, stick)``; the Fritsch-Carlson criterion then
    guarantees a monotone Hermite blend.
    """
    R = 1.0 - a
    z_meet = math.sqrt(R * R - stick * stick)

    def excess(z):
        r = math.sqrt(R * R - z * z)
        return z / r - 2.0 * (r - stick) / (1.0 - z)

    hi = min(z_meet, R) * (1 - 1e-12)
    if excess(hi) <= 0:
        return hi
    return optimize.brentq(excess, 0.0, hi, xtol=1e-15)


def build_profile(stick_radius=0.1, blend_parameter=0.05, resolution=512, z_extent=3.0):
    """Construct the grapefruit-on-a-stick profile.

    ``samples`` holds ``resolution`` points of ``(z, r(z))`` on
    ``[-z_extent, z_extent]`` and ``arclength_table`` the matching
    ``(s, z)`` pairs.
    """
    if not 0 < blend_parameter < stick_radius:
        raise InvalidParameter(
            f"need 0 < blend_parameter < stick_radius, got a={blend_parameter!r}, stick={stick_radius!r}"
        )
    if stick_radius >= 1.0 - blend_parameter:
        raise InvalidParameter("stick_radius must be smaller than the bulge radius 1 - a")
    if int(resolution) < 64:
        raise InvalidParameter(f"resolution must be at least 64, got {resolution!r}")
    resolution = int(resolution)
    prof = ProfileCurve(
        stick_radius=float(stick_radius),
        blend_parameter=float(blend_parameter),
        blend_start=_blend_start(float(stick_radius), float(blend_parameter)),
        resolution=resolution,
    )
    zs = np.linspace(-z_extent, z_extent, resolution)
    object.__setattr__(prof, "samples", np.column_stack([zs, prof.radius(zs)]))
    object.__setattr__(prof, "arclength_table", np.column_stack([prof.arclength(zs), zs]))
    return prof


# --------------------------------------------------------------------------
# Surface models
# --------------------------------------------------------------------------


class SurfaceModel:
    """Common interface of the chart-diagonal surfaces.

    Subclasses provide ``g_uu(v)``, ``v_domain`` and ``u_period``; ``g_vv`` is
    identically one in every supported chart.
    """

    kind = "abstract"
    u_period = None
    v_domain = (-math.inf, math.inf)

    def g_uu(self, v):
        raise NotImplementedError

    def g_vv(self, v):
        return np.ones_like(np.asarray(v, dtype=float))

    @property
    def chart(self):
        return {
            "u": "angle lift" if self.kind == "rotational_cover" else "fiber angle" if self.u_period else "x",
            "v": "profile arc length" if self.kind == "rotational_cover" else "base coordinate",
            "u_period": self.u_period,
            "v_domain": self.v_domain,
        }

    def meridian(self):
        """Parametrization used by the Clairaut integrals.

        Returns ``(rho, weight, v_to_sigma, breakpoints)`` such that the metric
        reads ``rho(s)^2 du^2 + weight(s)^2 ds^2`` in the meridian parameter
        ``s``; ``breakpoints`` lists parameter values where ``rho`` is not
        smooth.
        """

        def rho(s):
            return np.sqrt(self.g_uu(s))

        return rho, lambda s: np.ones_like(np.asarray(s, dtype=float)), lambda v: v, ()


class FlatPlane(SurfaceModel):
    kind = "flat_plane"

    def g_uu(self, v):
        return np.ones_like(np.asarray(v, dtype=float))

    def __repr__(self):
        return "FlatPlane()"


@dataclass(frozen=True, eq=False)
class RotationalCover(SurfaceModel):
    """Surface of revolution; ``unwrapped`` selects the universal cover."""

    profile: ProfileCurve
    unwrapped: bool = True
    kind = "rotational_cover"

    @property
    def u_period(self):
        return None if self.unwrapped else TWO_PI

    def g_uu(self, v):
        return self.profile.radius(self.profile.z_of_arclength(v)) ** 2

    def from_axial(self, u, z):
        """Chart point for angle lift ``u`` and axial coordinate ``z``."""
        return (u, self.profile.arclength(z))

    def to_axial(self, u, v):
        return (u, self.profile.z_of_arclength(v))

    def meridian(self):
        p = self.profile
        s_b = p.blend_start
        return (
            p.radius,
            lambda z: np.sqrt(1.0 + p.slope(z) ** 2),
            p.z_of_arclength,
            (-1.0, -s_b, s_b, 1.0),
        )


@dataclass(frozen=True, eq=False)
class WarpedProduct(SurfaceModel):
    """``(alpha, omega) x_a S^1`` with metric ``dv^2 + a(v)^2 h_K``."""

    warp: ScaleFactorSpec
    fiber_circumference: float = TWO_PI
    kind = "warped_product"
    u_period = TWO_PI

    @property
    def v_domain(self):
        return self.warp.domain

    def g_uu(self, v):
        return (self.warp(v) * self.fiber_circumference / TWO_PI) ** 2


def make_surface(kind_spec):
    """Build a :class:`SurfaceModel` from a plain mapping.

    Accepted forms::

        {"kind": "flat_plane"}
        {"kind": "rotational_cover", "stick_radius": 0.1, "blend_parameter": 0.05,
         "unwrapped": True, "resolution": 512}
        {"kind": "warped_product", "warp": "r^2", "domain": [1, "inf"],
         "fiber_circumference": 6.283...}
        {"kind": "cylinder", "radius": 1.0}
    """
    if isinstance(kind_spec, SurfaceModel):
        return kind_spec
    spec = dict(kind_spec)
    kind = spec.pop("kind", None)
    if kind == "flat_plane":
        _no_extra(spec, kind)
        return FlatPlane()
    if kind == "rotational_cover":
        unwrapped = bool(spec.pop("unwrapped", True))
        prof = build_profile(
            spec.pop("stick_radius", 0.1), spec.pop("blend_parameter", 0.05), spec.pop("resolution", 512)
        )
        _no_extra(spec, kind)
        return RotationalCover(prof, unwrapped)
    if kind == "warped_product":
        warp = spec.pop("warp")
        dom = spec.pop("domain", (-math.inf, math.inf))
        circ = float(spec.pop("fiber_circumference", TWO_PI))
        _no_extra(spec, kind)
        if circ <= 0:
            raise InvalidParameter("fiber_circumference must be positive")
        if not isinstance(warp, ScaleFactorSpec):
            warp = ScaleFactorSpec(str(warp), tuple(float(d) for d in dom))
        return WarpedProduct(warp, circ)
    if kind == "cylinder":
        radius = float(spec.pop("radius", 1.0))
        _no_extra(spec, kind)
        if radius <= 0:
            raise InvalidParameter("cylinder radius must be positive")
        return WarpedProduct(ScaleFactorSpec("1"), TWO_PI * radius)
    raise InvalidParameter(f"unknown surface kind {kind!r}")


def _no_extra(spec, kind):
    if spec:
        raise InvalidParameter(f"unexpected parameters for {kind}: {sorted(spec)}")


# --------------------------------------------------------------------------
# Metric grids
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MetricGrid:
    """Rectangular lattice over a surface chart.

    Nodes are numbered row-major, ``node = iv * n_u + iu``. Edge lengths use
    the metric at the edge midpoint, so ``weight(p, q) == weight(q, p)``.
    """

    surface: SurfaceModel
    spacing: tuple
    u: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)
    neighborhood_order: int = 16

    @property
    def periodic(self):
        return self.surface.u_period is not None

    @property
    def shape(self):
        return (len(self.v), len(self.u))

    @property
    def n_nodes(self):
        return len(self.v) * len(self.u)

    @property
    def extent(self):
        return ((float(self.u[0]), float(self.u[-1])), (float(self.v[0]), float(self.v[-1])))

    @cached_property
    def offsets(self):
        return stencil(self.neighborhood_order)

    @cached_property
    def half_row_scale(self):
        """``sqrt(g_uu)`` at every half row ``v[0] + k * h_v / 2``."""
        hv = self.spacing[1]
        vs = self.v[0] + 0.5 * hv * np.arange(2 * len(self.v) - 1)
        return np.sqrt(self.surface.g_uu(vs))

    @property
    def row_scale(self):
        return self.half_row_scale[::2]

    @cached_property
    def error_bound(self):
        """Worst relative overestimate of the stencil's polygonal norm.

        For each row the scaled stencil vectors are sorted by angle; a
        direction lying between two neighbours separated by angle ``gap`` is
        overestimated by at most ``1/cos(gap/2) - 1``.
        """
        hu, hv = self.spacing
        half = np.array(_HALF_STENCIL[self.neighborhood_order], dtype=float)
        worst = 0.0
        for s in np.unique(np.round(self.row_scale, 12)):
            ang = np.sort(np.arctan2(half[:, 1] * hv, half[:, 0] * hu * s))
            gaps = np.diff(np.concatenate([ang, [ang[0] + math.pi]]))
            worst = max(worst, float(gaps.max()))
        return 1.0 / math.cos(worst / 2.0) - 1.0

    def node(self, iu, iv):
        return int(iv) * len(self.u) + int(iu)

    def index(self, node):
        iv, iu = divmod(int(node), len(self.u))
        return iu, iv

    def coords(self, node):
        iu, iv = self.index(node)
        return float(self.u[iu]), float(self.v[iv])

    def nearest_node(self, u, v, *, exact=False):
        """Node closest to chart point ``(u, v)``.

        With ``exact=True`` the point must coincide with a node up to 1e-6 of
        the spacing.
        """
        hu, hv = self.spacing
        if self.periodic:
            u = (u - self.u[0]) % self.surface.u_period + self.u[0]
        fu = (u - self.u[0]) / hu
        fv = (v - self.v[0]) / hv
        iu, iv = int(round(fu)), int(round(fv))
        if self.periodic:
            iu %= len(self.u)
        if not (0 <= iu < len(self.u) and 0 <= iv < len(self.v)):
            raise OutOfDomain(f"point ({u:g}, {v:g}) lies outside the grid")
        if exact and (abs(fu - round(fu)) > 1e-6 or abs(fv - round(fv)) > 1e-6):
            raise OutOfDomain(f"point ({u:g}, {v:g}) is not a grid node")
        return self.node(iu, iv)

    def node_coords(self):
        """Arrays ``(U, V)`` of chart coordinates, shape ``self.shape``."""
        return np.meshgrid(self.u, self.v)

    def edge_length(self, iv, du, dv):
        """Length of the edge from row ``iv`` along offset ``(du, dv)``."""
        hu, hv = self.spacing
        s = self.half_row_scale[2 * iv + dv]
        return math.hypot(s * du * hu, dv * hv)

    def neighbors(self, node):
        """Yield ``(neighbor, weight)`` for every stencil edge of ``node``."""
        iu, iv = self.index(node)
        nu, nv = len(self.u), len(self.v)
        for du, dv in self.offsets:
            ju, jv = iu + du, iv + dv
            if self.periodic:
                ju %= nu
            if 0 <= ju < nu and 0 <= jv < nv:
                yield self.node(ju, jv), self.edge_length(iv, du, dv)

    @cached_property
    def edge_weights(self):
        """Symmetric sparse adjacency matrix of edge lengths."""
        nu, nv = len(self.u), len(self.v)
        hu, hv = self.spacing
        iu, iv = np.meshgrid(np.arange(nu), np.arange(nv))
        iu, iv = iu.ravel(), iv.ravel()
        rows, cols, vals = [], [], []
        for du, dv in self.offsets:
            ju, jv = iu + du, iv + dv
            if self.periodic:
                ju = ju % nu
            ok = (ju >= 0) & (ju < nu) & (jv >= 0) & (jv < nv)
            s = self.half_row_scale[2 * iv[ok] + dv]
            rows.append(iv[ok] * nu + iu[ok])
            cols.append(jv[ok] * nu + ju[ok])
            vals.append(np.hypot(s * du * hu, dv * hv))
        n = nu * nv
        return sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
        )

    def boundary_mask(self):
        """Nodes on the non-periodic edges of the lattice, shape ``self.shape``."""
        m = np.zeros(self.shape, dtype=bool)
        m[0, :] = m[-1, :] = True
        if not self.periodic:
            m[:, 0] = m[:, -1] = True
        return m

    def refined(self, factor=2):
        """Same surface and extent with spacing divided by ``factor``."""
        (u0, u1), (v0, v1) = self.extent
        hu, hv = self.spacing
        if self.periodic:
            ext = ((0.0, self.surface.u_period), (v0, v1))
        else:
            ext = ((u0, u1), (v0, v1))
        return sample_grid(self.surface, (hu / factor, hv / factor), ext, self.neighborhood_order)


def sample_grid(surface, spacing, extent, neighborhood_order=16):
    """Sample ``surface`` on a rectangular lattice.

    ``extent`` is ``((u0, u1), (v0, v1))``. On surfaces with a periodic
    ``u`` the u-range is replaced by one full period and the u-spacing is
    adjusted to divide it.
    """
    surface = make_surface(surface)
    hu, hv = (float(spacing[0]), float(spacing[1]))
    if not (hu > 0 and hv > 0):
        raise InvalidParameter(f"spacing must be positive, got {spacing!r}")
    (u0, u1), (v0, v1) = extent
    u0, u1, v0, v1 = (float(u0), float(u1), float(v0), float(v1))
    lo, hi = surface.v_domain
    if not (lo < v0 < v1 < hi) and not (lo <= v0 < v1 <= hi and math.isinf(lo) and math.isinf(hi)):
        raise OutOfDomain(f"v-extent [{v0:g}, {v1:g}] is not inside the chart domain ({lo:g}, {hi:g})")
    stencil(neighborhood_order)
    if surface.u_period is not None:
        n_u = max(8, int(round(surface.u_period / hu)))
        hu = surface.u_period / n_u
        u = u0 + hu * np.arange(n_u)
    else:
        if not u1 > u0:
            raise InvalidParameter("empty u-extent")
        n_u = int(round((u1 - u0) / hu)) + 1
        u = u0 + hu * np.arange(n_u)
    n_v = int(round((v1 - v0) / hv)) + 1
    v = v0 + hv * np.arange(n_v)
    if n_u < 3 or n_v < 3:
        raise InvalidParameter("grid needs at least 3 nodes in each direction")
    grid = MetricGrid(surface, (hu, hv), u, v, int(neighborhood_order))
    if not np.all(grid.half_row_scale > 0) or not np.all(np.isfinite(grid.half_row_scale)):
        raise InvalidParameter("metric coefficient is not positive on the grid extent")
    return grid
