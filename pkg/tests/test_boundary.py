import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from horizon.boundary import (
    GromovPoint,
    ball_probes,
    busemann_limit,
    busemann_truncations,
    classify_warped_boundary,
    coincidence_test,
    count_ends,
    DiscreteCurve,
    embed_via_probes,
    ends_profile,
    gromov_embed,
    lattice_ray,
    make_probe_set,
    probe_fields,
    quotient_distance,
)
from horizon.errors import HypothesisViolated, InsufficientData, MismatchedProbe, NotStabilized, NotUnitSpeed
from horizon.geodesic import distance_field
from horizon.surfaces import make_surface, sample_grid


@pytest.fixture(scope="module")
def strip():
    """Flat plane grid long in +u, for rays c(t) = (t, 0)."""
    return sample_grid({"kind": "flat_plane"}, (0.1, 0.1), ((-2, 30), (-3, 3)), 16)


@pytest.fixture(scope="module")
def strip_probes(strip):
    return ball_probes(strip, strip.nearest_node(0, 0), 1.0, 30, seed=3)


def test_embed_from_basepoint(plane_grid):
    o = plane_grid.nearest_node(0, 0)
    probe = ball_probes(plane_grid, o, 1.0, 20)
    f = distance_field(plane_grid, o)
    g = gromov_embed(f, probe)
    assert g.values[probe.base_index] == 0.0
    np.testing.assert_array_equal(g.values, f.values[list(probe.points)])


def test_embed_ignores_constants(plane_grid):
    probe = ball_probes(plane_grid, plane_grid.nearest_node(0, 0), 1.0, 20)
    f = distance_field(plane_grid, plane_grid.nearest_node(2, 1))
    a, b = gromov_embed(f, probe), gromov_embed(f.shifted(17.25), probe)
    # equal up to the rounding of the shift itself
    assert quotient_distance(a, b) <= 1e-13


def test_rebasing_round_trip(plane_grid):
    probe = ball_probes(plane_grid, plane_grid.nearest_node(0, 0), 1.0, 20)
    g = gromov_embed(distance_field(plane_grid, 5), probe)
    back = g.rebased(probe.points[7]).rebased(probe.basepoint)
    np.testing.assert_allclose(back.values, g.values, atol=1e-14)


def test_far_sources_cluster(strip, strip_probes):
    fields = probe_fields(strip_probes)
    p, q = strip.nearest_node(20, 0), strip.nearest_node(25, 0)
    a, b = embed_via_probes(fields, strip_probes, p), embed_via_probes(fields, strip_probes, q)
    diam = 2.0
    assert quotient_distance(a, b) <= 2 * 5.0 * diam / 20.0


def test_mismatched_probe(plane_grid):
    p1 = ball_probes(plane_grid, plane_grid.nearest_node(0, 0), 1.0, 10, seed=1)
    p2 = ball_probes(plane_grid, plane_grid.nearest_node(0, 0), 1.0, 10, seed=2)
    f = distance_field(plane_grid, 0)
    with pytest.raises(MismatchedProbe):
        quotient_distance(gromov_embed(f, p1), gromov_embed(f, p2))


def _points(probe, draw):
    n = len(probe.points)
    vals = draw(st.lists(st.floats(-50, 50), min_size=n, max_size=n))
    return GromovPoint(probe, np.array(vals) - vals[probe.base_index])


@given(st.data())
def test_quotient_is_metric_exactly(data):
    grid = sample_grid({"kind": "flat_plane"}, (1, 1), ((0, 3), (0, 3)), 8)
    w = data.draw(st.lists(st.floats(0.01, 1), min_size=6, max_size=6))
    probe = make_probe_set(grid, [0, 3, 5, 9, 12, 15], weights=w)
    a, b, c = (_points(probe, data.draw) for _ in range(3))
    ab, bc, ac = (quotient_distance(x, y, exact=True) for x, y in ((a, b), (b, c), (a, c)))
    assert isinstance(ab, Fraction)
    assert ab == quotient_distance(b, a, exact=True)
    assert ac <= ab + bc
    assert quotient_distance(a, a, exact=True) == 0


def test_orthogonal_horofunctions_separate(plane_grid):
    # planar Busemann functions of rays at angles 0 and pi/2 are u and v
    for count in (20, 60):
        probe = ball_probes(plane_grid, plane_grid.nearest_node(0, 0), 1.0, count, seed=0)
        U = np.array([plane_grid.coords(p) for p in probe.points])
        a = GromovPoint(probe, U[:, 0] - U[probe.base_index, 0])
        b = GromovPoint(probe, U[:, 1] - U[probe.base_index, 1])
        assert quotient_distance(a, b) > 0.5


def test_plane_ray_converges_to_u(strip, strip_probes):
    c = lattice_ray(strip, strip.nearest_node(0, 0), (15, 0), 20)
    s = busemann_limit(busemann_truncations(strip, c, strip_probes), 0.02, 3)
    assert s.status == "converged"
    U = np.array([strip.coords(p)[0] for p in strip_probes.points])
    assert np.abs(s.busemann - U).max() <= 0.02 + 2 * strip.error_bound
    assert s.monotonicity_defect() <= 2 * strip.error_bound
    np.testing.assert_allclose(s.limit.values, -(s.busemann - s.busemann[strip_probes.base_index]))


def test_limit_is_lipschitz(strip, strip_probes):
    c = lattice_ray(strip, strip.nearest_node(0, 0), (15, 0), 20)
    s = busemann_limit(busemann_truncations(strip, c, strip_probes), 0.02, 3)
    fields = probe_fields(strip_probes)
    pts = list(strip_probes.points)
    D = np.vstack([f.values[pts] for f in fields])
    gap = np.abs(s.busemann[:, None] - s.busemann[None, :]) - D
    assert gap.max() <= 2 * strip.error_bound * D.max()


def test_constant_curve_gives_distance_function(strip, strip_probes):
    n = strip.nearest_node(3, 1)
    # parameters accumulate at D = 1
    c = DiscreteCurve(1.0 - 0.5 ** np.arange(16.0), np.full(16, n))
    s = busemann_limit(busemann_truncations(strip, c, strip_probes), 1e-3, 3)
    assert s.status == "converged"
    d = distance_field(strip, n).values[list(strip_probes.points)]
    np.testing.assert_allclose(s.busemann, -(d - d[strip_probes.base_index]), atol=1e-12)


def test_insufficient_data(strip, strip_probes):
    c = lattice_ray(strip, strip.nearest_node(0, 0), (10, 0), 4)
    with pytest.raises(InsufficientData):
        busemann_limit(busemann_truncations(strip, c, strip_probes), 0.01, 3)


def test_too_fast_curve_rejected(strip, strip_probes):
    nodes = [strip.nearest_node(x, 0) for x in (0, 5, 10)]
    with pytest.raises(NotUnitSpeed):
        busemann_truncations(strip, DiscreteCurve(np.array([0.0, 1.0, 2.0]), np.array(nodes)), strip_probes)


def test_stick_curve_converges(grapefruit):
    hu = 2 * math.pi / 40
    g = sample_grid(grapefruit, (hu, 0.1), ((-hu * 200, hu * 200), (-3.5, 3.5)), 16)
    base = g.nearest_node(0, 0)
    probe = ball_probes(g, base, 1.5, 12, seed=0)
    start = g.nearest_node(0, grapefruit.profile.arclength(-2.0))
    c = lattice_ray(g, start, (16, 0), 12)
    s = busemann_limit(busemann_truncations(g, c, probe), 0.05, 3)
    assert s.status == "converged"
    assert s.monotonicity_defect() <= 2 * g.error_bound * c.params[-1]


def test_empty_family_is_vacuous(strip, strip_probes):
    seq = [strip.nearest_node(x, 0) for x in (10, 15, 20, 25)]
    rep = coincidence_test(strip, [seq], [], strip_probes, 0.05)
    assert rep.verdict == "counterexample_candidate"
    assert rep.vacuous_family and rep.evidence_only


def test_plane_ray_family_matches_radial_sequence(strip, strip_probes):
    seq = [strip.nearest_node(x, 0) for x in (16, 20, 24, 28)]
    ray = lattice_ray(strip, strip.nearest_node(0, 0), (15, 0), 20, "east")
    rep = coincidence_test(strip, [seq], [ray], strip_probes, 0.05)
    assert rep.verdict == "coincide_on_sample"
    assert rep.matches[0].min_distance <= 10 * 0.05


def test_ends_plane_and_cylinder():
    plane = sample_grid({"kind": "flat_plane"}, (0.25, 0.25), ((-12, 12), (-12, 12)), 16)
    assert count_ends(plane, (4, 6, 8), plane.nearest_node(0, 0)) == 1
    cyl = make_surface({"kind": "cylinder", "radius": 1.0})
    g = sample_grid(cyl, (2 * math.pi / 40, 0.25), ((0, 2 * math.pi), (-12, 12)), 16)
    assert count_ends(g, (4, 6, 8), g.nearest_node(0, 0)) == 2


def test_ends_not_stabilized():
    cyl = make_surface({"kind": "cylinder", "radius": 1.0})
    g = sample_grid(cyl, (2 * math.pi / 40, 0.25), ((0, 2 * math.pi), (-12, 12)), 16)
    o = g.nearest_node(0, 0)
    assert ends_profile(g, (1.0, 8.0), o) == [1, 2]
    with pytest.raises(NotStabilized):
        count_ends(g, (1.0, 8.0), o)


@pytest.mark.parametrize(
    "p,label", [(0.3, "Point"), (0.5, "Point"), (0.7, "ManifoldK"), (1.0, "ManifoldK"), (2.0, "ManifoldK")]
)
def test_warped_threshold(p, label):
    from horizon.expr import ScaleFactorSpec

    assert classify_warped_boundary(ScaleFactorSpec(f"r^{p}", (1, math.inf))) == label


def test_constant_warp_is_point():
    from horizon.expr import ScaleFactorSpec

    assert classify_warped_boundary(ScaleFactorSpec("1", (-math.inf, math.inf))) == "Point"


def test_non_monotone_warp_violates_hypothesis():
    from horizon.expr import ScaleFactorSpec

    with pytest.raises(HypothesisViolated):
        classify_warped_boundary(ScaleFactorSpec("r^2 - 4*r + 5", (0, math.inf)), "omega", 1.0)
