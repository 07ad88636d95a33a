"""Obstruction reports for standard static and FLRW spacetimes.

Static slices go through two tests in order. First the ends count: two or
more ends obstruct any conformal extension, conclusively. Then the
coincidence test between Gromov limits and Busemann limits: a Gromov limit
far from every Busemann limit obstructs at evidence grade.

FLRW inputs first decide the improper integrals of ``a`` toward each infinite
end of time. Either one finite obstructs an essentially null compactification.
Otherwise the spacetime is conformal to a static one over the unscaled slice,
whose report decides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._integrals import ConvergenceVerdict, default_start, integral_converges, resolve_end
from .boundary import (
    ball_probes,
    coincidence_test,
    count_ends,
    ends_profile,
    lattice_ray,
    make_probe_set,
    probe_fields,
)
from .errors import (
    HorizonError,
    InsufficientData,
    InvalidParameter,
    NoCauchySubsequence,
    NotStabilized,
    NotUnitSpeed,
    OutOfDomain,
    Undetermined,
)
from .expr import ScaleFactorSpec
from .geodesic import distance_field
from .surfaces import TWO_PI, FlatPlane, MetricGrid, RotationalCover, WarpedProduct, make_surface, sample_grid

__all__ = [
    "ConvergenceVerdict",
    "ConformalReduction",
    "ObstructionReport",
    "SlicePlan",
    "StaticOptions",
    "TestOutcome",
    "conformal_reduce",
    "default_plan",
    "flrw_obstruction_report",
    "integral_converges",
    "static_obstruction_report",
]

NO_OBSTRUCTION = "no_obstruction_found"
OBSTRUCTED_NULL = "obstructed_essentially_null"
OBSTRUCTED_EXTENSION = "obstructed_extension"
UNDETERMINED = "undetermined"

# which result fired, in plain words
ENDS_CRITERION = "ends_criterion"
BUSEMANN_GROMOV_MISMATCH = "busemann_gromov_mismatch"
FLRW_FINITE_TIME = "flrw_finite_time_integral"
FLRW_SLICE_NOT_CONE = "flrw_slice_not_cone"
FLRW_SLICE_MISMATCH = "flrw_slice_boundary_mismatch"

EXIT_CODES = {"none": 0, "conclusive": 10, "evidence": 11, "undetermined": 20}


# ---------------------------------------------------------------------------
# Conformal reduction
# ---------------------------------------------------------------------------

_GX, _GW = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True, eq=False)
class ConformalReduction:
    """Conformal time ``tau(t) = int_{t0}^t ds / a(s)`` and its range.

    ``slice`` is the unscaled spatial slice when one was supplied.
    """

    spec: ScaleFactorSpec
    origin: float
    t: np.ndarray = field(repr=False)
    tau: np.ndarray = field(repr=False)
    tau_range: tuple
    verdicts: dict
    slice: object = None

    def __call__(self, t):
        return np.interp(t, self.t, self.tau)


def _segment_integrals(spec, xs):
    a, b = xs[:-1], xs[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    pts = mid[:, None] + half[:, None] * _GX[None, :]
    with np.errstate(over="ignore", divide="ignore"):
        vals = np.broadcast_to(1.0 / np.asarray(spec(pts), dtype=float), pts.shape)
    return half * (vals @ _GW)


def conformal_reduce(spec, slice=None, tol=1e-8):
    """Tabulate conformal time and decide whether each end of its range is finite."""
    if not isinstance(spec, ScaleFactorSpec):
        raise InvalidParameter("spec must be a ScaleFactorSpec")
    lo, hi = spec.domain
    t0 = default_start(spec, hi if math.isinf(hi) else lo)
    xs = np.unique(np.concatenate([spec.sample_points(), [t0]]))
    k0 = int(np.searchsorted(xs, t0))
    seg = _segment_integrals(spec, xs)
    # accumulate outward from t0 so huge far-side values do not swamp the near side
    tau = np.zeros(len(xs))
    tau[k0 + 1 :] = np.cumsum(seg[k0:])
    tau[:k0] = -np.cumsum(seg[:k0][::-1])[::-1]
    # 1/a may underflow far out, so the table is only required to be nondecreasing
    if not np.all(np.isfinite(tau)) or not np.all(np.diff(tau) >= 0):
        raise Undetermined("conformal time table is not finite and nondecreasing")
    verdicts, ends = {}, []
    for name in ("alpha", "omega"):
        end = resolve_end(spec, name)
        v = integral_converges(spec, "reciprocal", end, tol=tol, start=t0)
        verdicts[name] = v
        if v.status == "undetermined":
            raise Undetermined(f"conformal time toward {end:g} is undecided: {v.detail}")
        if v.status == "infinite":
            ends.append(math.copysign(math.inf, end - t0))
        else:
            if v.value is None:
                raise Undetermined(f"finite conformal time toward {end:g} could not be evaluated")
            ends.append(math.copysign(v.value, end - t0))
    return ConformalReduction(spec, t0, xs, tau, (ends[0], ends[1]), verdicts, slice)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TestOutcome:
    """One step of a report.

    ``grade`` is ``conclusive`` for certified outcomes, ``evidence`` for
    resolution-limited ones and ``failed`` when the test could not decide.
    """

    name: str
    outcome: str
    grade: str
    fired: bool = False
    evidence: dict = field(default_factory=dict)
    detail: object = field(default=None, compare=False, repr=False)  # raw result for exporters


@dataclass(frozen=True)
class ObstructionReport:
    input_kind: str  # flrw | standard_static
    tests_run: tuple
    verdict: str
    conclusive: bool
    provenance: str | None = None

    @property
    def verdict_class(self):
        if self.verdict == UNDETERMINED:
            return "undetermined"
        if self.verdict == NO_OBSTRUCTION:
            return "none"
        return "conclusive" if self.conclusive else "evidence"

    @property
    def exit_code(self):
        return EXIT_CODES[self.verdict_class]

    def as_pairs(self):
        """Flat ``(key, value)`` pairs, stable order."""
        out = [
            ("input_kind", self.input_kind),
            ("verdict", self.verdict),
            ("grade", self.verdict_class),
            ("conclusive", str(self.conclusive).lower()),
            ("provenance", self.provenance or "none"),
            ("tests", ",".join(t.name for t in self.tests_run)),
        ]
        for t in self.tests_run:
            out.append((f"{t.name}.outcome", t.outcome))
            out.append((f"{t.name}.grade", t.grade))
            out.append((f"{t.name}.fired", str(t.fired).lower()))
            for k, v in t.evidence.items():
                out.append((f"{t.name}.{k}", _fmt(v)))
        return out

    def to_text(self):
        """UTF-8 ``key = value`` document."""
        return "".join(f"{k} = {v}\n" for k, v in self.as_pairs())


def _fmt(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    if v is None:
        return "none"
    return str(v)


def _fold(tests):
    """Verdict from ordered test outcomes; the first firing test decides."""
    for t in tests:
        if t.fired:
            return t
    return None


# ---------------------------------------------------------------------------
# Slice plans
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StaticOptions:
    """Numerical options for the static pipeline.

    ``resolution`` is the number of lattice steps per unit of arclength
    across the slice (``None`` picks the per-surface default).
    """

    resolution: int | None = None
    tol: float = 0.05
    probe_count: int = 50
    seed: int = 0
    method: str = "eikonal"
    window: int = 3
    tail: int = 2

    def __post_init__(self):
        if self.resolution is not None and int(self.resolution) <= 0:
            raise InvalidParameter("resolution must be a positive integer")
        if not self.tol > 0:
            raise InvalidParameter("tol must be positive")
        if self.probe_count < 2:
            raise InvalidParameter("probe_count must be at least 2")


@dataclass(frozen=True, eq=False)
class SlicePlan:
    """Grid, ball radii and curves for the static tests on one slice."""

    grid: MetricGrid
    basepoint: int
    radii: tuple
    escape_sequences: list
    curve_family: list
    probe_factory: object  # callable(options) -> ProbeSet
    label: str = ""

    def probes(self, options):
        return self.probe_factory(options)


def _plane_plan(surface, options):
    r = options.resolution or 4
    h = 1.0 / r
    g = sample_grid(surface, (h, h), ((-35.0, 35.0), (-35.0, 35.0)), 16)
    o = g.nearest_node(0.0, 0.0)
    seq = [g.nearest_node(4.0 * n, 0.0) for n in range(1, 9)]
    curves = []
    for dx, dy, size in ((1, 0, 4), (0, 1, 4), (-1, 0, 4), (0, -1, 4), (1, 1, 3), (-1, 1, 3), (-1, -1, 3), (1, -1, 3)):
        step = (dx * size * r, dy * size * r)
        curves.append(lattice_ray(g, o, step, 9, f"ray ({dx},{dy})"))

    def probes(opts):
        radius = max(1.0, 1.25 * h * math.sqrt(opts.probe_count / math.pi))
        return ball_probes(g, o, radius, opts.probe_count, seed=opts.seed, method=opts.method)

    return SlicePlan(g, o, (10.0, 20.0, 30.0), [seq], curves, probes, "flat plane")


def _warped_plan(surface, options):
    r = options.resolution or 10
    hv = 1.0 / r
    lo, hi = surface.v_domain
    v0 = max(lo + hv, -20.0) if math.isfinite(lo) else -20.0
    v1 = min(hi - hv, 20.0) if math.isfinite(hi) else 20.0
    scale = float(np.sqrt(surface.g_uu(np.array([0.5 * (v0 + v1)])))[0])
    hu = max(hv / max(scale, 1e-12), TWO_PI / 2048)
    g = sample_grid(surface, (hu, hv), ((0.0, TWO_PI), (v0, v1)), 16)
    vc = 0.5 * (v0 + v1)
    o = g.nearest_node(0.0, vc)
    span = 0.5 * (v1 - v0)
    radii = tuple(span * f for f in (0.5, 0.65, 0.8))
    nv, nu = g.shape
    iv0 = g.index(o)[1]
    k = max(1, (nv - 1 - iv0) // 10)
    seq = [g.node(0, iv0 + k * j) for j in range(1, 9) if iv0 + k * j < nv]
    curves = []
    for frac in (0.0, 0.25, 0.5, 0.75):
        start = g.node(int(round(frac * nu)) % nu, iv0)
        for d in (1, -1):
            curves.append(lattice_ray(g, start, (0, d * k), 9, f"radial u={frac * TWO_PI:.2f} dir={d}"))

    def probes(opts):
        return ball_probes(g, o, min(1.0, 0.1 * span), opts.probe_count, seed=opts.seed, method=opts.method)

    return SlicePlan(g, o, radii, [seq], curves, probes, "warped product")


def _grapefruit_plan(surface, options):
    r = options.resolution or 20
    hv = 1.0 / r
    hu = math.pi / r
    half = round(384 * r / 20)
    g = sample_grid(surface, (hu, hv), ((-hu * half, hu * half), (-4.5, 4.5)), 16)
    base = g.nearest_node(0.0, 0.0, exact=True)
    seq = [g.nearest_node(TWO_PI * n, 0.0, exact=True) for n in range(1, 9)]
    prof = surface.profile
    su = max(1, round(16 * r / 20))
    sv = max(1, round(4 * r / 20))
    curves = []
    for z in (-2.5, -2.0, -1.5, 1.5, 2.0, 2.5):
        start = g.nearest_node(0.0, prof.arclength(z))
        for d in (1, -1):
            curves.append(lattice_ray(g, start, (su * d, 0), 24, f"stick z={z} dir={d}"))
    for u in (-math.pi, 0.0, math.pi):
        for d in (1, -1):
            start = g.nearest_node(u, 1.6 * d)
            curves.append(lattice_ray(g, start, (0, sv * d), 14, f"radial u={u:.2f} dir={d}"))

    def probes(opts):
        rng = np.random.default_rng(opts.seed)
        pts = set()
        while len(pts) < opts.probe_count - 1:
            iu = int(rng.integers(-r, r + 1))
            n = g.nearest_node(iu * hu, float(rng.uniform(-2.6, 2.6)))
            if n != base:
                pts.add(n)
        return make_probe_set(g, [base, *sorted(pts)])

    return SlicePlan(g, base, (2.5, 3.0, 3.5), [seq], curves, probes, "unwrapped grapefruit")


def _grid_plan(grid, options):
    (u0, u1), (v0, v1) = grid.extent
    o = grid.nearest_node(0.5 * (u0 + u1), 0.5 * (v0 + v1))
    d = distance_field(grid, o, options.method).as_array()
    reach = float(np.min(d[grid.boundary_mask()]))
    radii = tuple(reach * f for f in (0.5, 0.65, 0.8))
    nv, nu = grid.shape
    iu0, iv0 = grid.index(o)
    k = max(1, (nu - 1 - iu0) // 10)
    seq = [grid.node(iu0 + k * j, iv0) for j in range(1, 9) if iu0 + k * j < nu]
    curves = []
    for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        room = (nu - 1 - iu0 if dx > 0 else iu0) if dx else (nv - 1 - iv0 if dy > 0 else iv0)
        step = max(1, room // 9)
        curves.append(lattice_ray(grid, o, (dx * step, dy * step), 9, f"ray ({dx},{dy})"))

    def probes(opts):
        return ball_probes(grid, o, 0.1 * reach, opts.probe_count, seed=opts.seed, method=opts.method)

    return SlicePlan(grid, o, radii, [seq], curves, probes, "custom grid")


def default_plan(slice, options=None):
    """Per-surface test plan: grid, ball radii, escape sequence and curve family."""
    options = options or StaticOptions()
    if isinstance(slice, MetricGrid):
        return _grid_plan(slice, options)
    surface = make_surface(slice)
    if isinstance(surface, FlatPlane):
        return _plane_plan(surface, options)
    if isinstance(surface, RotationalCover):
        if not surface.unwrapped:
            raise InvalidParameter("wrapped rotational surfaces are compact in u; use the unwrapped cover")
        return _grapefruit_plan(surface, options)
    if isinstance(surface, WarpedProduct):
        return _warped_plan(surface, options)
    raise InvalidParameter(f"no default plan for {surface!r}")


# ---------------------------------------------------------------------------
# Pipelines
# ---------------------------------------------------------------------------

_SOFT_FAILURES = (NotStabilized, NoCauchySubsequence, Undetermined, InsufficientData, OutOfDomain, NotUnitSpeed)


def _static_tests(plan, options):
    tests = []
    try:
        profile = ends_profile(plan.grid, plan.radii, plan.basepoint, options.method)
        ends = count_ends(plan.grid, plan.radii, plan.basepoint, options.method)
    except _SOFT_FAILURES as exc:
        tests.append(TestOutcome("ends", "failed", "failed", evidence={"error": str(exc)}))
        return tests
    fired = ends >= 2
    tests.append(
        TestOutcome(
            "ends",
            f"{ends} ends",
            "conclusive",
            fired,
            {"count": ends, "profile": list(profile), "radii": list(plan.radii)},
            plan,
        )
    )
    if fired:
        return tests
    try:
        probe = plan.probes(options)
        fields = probe_fields(probe, options.method)
        rep = coincidence_test(
            plan.grid,
            plan.escape_sequences,
            plan.curve_family,
            probe,
            options.tol,
            window=options.window,
            tail=options.tail,
            method=options.method,
            fields=fields,
        )
    except _SOFT_FAILURES as exc:
        tests.append(TestOutcome("coincidence", "failed", "failed", evidence={"error": str(exc)}))
        return tests
    s = rep.summary()
    tests.append(
        TestOutcome(
            "coincidence",
            rep.verdict,
            "evidence",
            rep.verdict == "counterexample_candidate",
            {
                "min_distances": s["min_distances"],
                "separation": s["separation"],
                "family_size": s["family"],
                "curves_tested": len(rep.curves),
                "sequence_increments": [list(t.increments) for t in rep.sequences],
                "probe_count": len(probe.points),
            },
            rep,
        )
    )
    return tests


def _static_verdict(tests):
    hit = _fold(tests)
    if hit is not None:
        prov = ENDS_CRITERION if hit.name == "ends" else BUSEMANN_GROMOV_MISMATCH
        return OBSTRUCTED_EXTENSION, hit.grade == "conclusive", prov
    if any(t.grade == "failed" for t in tests):
        return UNDETERMINED, False, None
    return NO_OBSTRUCTION, False, None


def static_obstruction_report(slice, options=None, plan=None):
    """Ends count, then the Busemann/Gromov coincidence test, on a static slice."""
    options = options or StaticOptions()
    plan = plan or default_plan(slice, options)
    tests = _static_tests(plan, options)
    verdict, conclusive, prov = _static_verdict(tests)
    return ObstructionReport("standard_static", tuple(tests), verdict, conclusive, prov)


def flrw_obstruction_report(spec, slice, options=None, plan=None, tol=1e-8):
    """Finite-time integrals of ``a`` first; otherwise the static report of the slice."""
    if not isinstance(spec, ScaleFactorSpec):
        raise InvalidParameter("spec must be a ScaleFactorSpec")
    options = options or StaticOptions()
    tests = []
    undecided = False
    for name, end in (("future", math.inf), ("past", -math.inf)):
        lo, hi = spec.domain
        if end not in (lo, hi):
            continue
        try:
            v = integral_converges(spec, "identity", end, tol=tol)
        except HorizonError as exc:
            tests.append(TestOutcome(f"integral_{name}", "failed", "failed", evidence={"error": str(exc)}))
            undecided = True
            continue
        fired = v.status == "finite"
        grade = "failed" if v.status == "undetermined" else "conclusive"
        undecided |= v.status == "undetermined"
        tests.append(
            TestOutcome(
                f"integral_{name}",
                v.status,
                grade,
                fired,
                {"value": v.value, "remainder": v.remainder, "start": v.start, "method": v.method},
                v,
            )
        )
    if not tests:
        raise InvalidParameter("the scale factor domain has no infinite end")
    if any(t.fired for t in tests):
        return ObstructionReport("flrw", tuple(tests), OBSTRUCTED_NULL, True, FLRW_FINITE_TIME)
    if undecided:
        return ObstructionReport("flrw", tuple(tests), UNDETERMINED, False, None)
    try:
        red = conformal_reduce(spec, slice, tol=tol)
    except HorizonError as exc:
        tests.append(TestOutcome("conformal_time", "failed", "failed", evidence={"error": str(exc)}))
        return ObstructionReport("flrw", tuple(tests), UNDETERMINED, False, None)
    tests.append(TestOutcome("conformal_time", "reduced", "conclusive", False, {"range": list(red.tau_range)}, red))
    static = static_obstruction_report(slice, options, plan)
    tests.extend(static.tests_run)
    if static.verdict == OBSTRUCTED_EXTENSION:
        prov = FLRW_SLICE_NOT_CONE if static.provenance == ENDS_CRITERION else FLRW_SLICE_MISMATCH
        return ObstructionReport("flrw", tuple(tests), OBSTRUCTED_EXTENSION, static.conclusive, prov)
    return ObstructionReport("flrw", tuple(tests), static.verdict, False, None)
