import math

import numpy as np
import pytest

from horizon.geodesic import clairaut_distance, distance_field, distance_fields, pairwise_distance, probe_threads
from horizon.surfaces import make_surface, sample_grid

GRAPEFRUIT_AC = 2.836207566


def test_axis_targets_exact(plane_grid):
    o = plane_grid.nearest_node(0, 0)
    f = distance_field(plane_grid, o, "graph")
    for u, v in [(1, 0), (0, -2), (-2.5, 0)]:
        assert f[plane_grid.nearest_node(u, v)] == pytest.approx(math.hypot(u, v), abs=1e-12)


def test_eight_stencil_bound_at_22_5_degrees():
    g = sample_grid({"kind": "flat_plane"}, (0.05, 0.05), ((-3, 3), (-3, 3)), 8)
    o = g.nearest_node(0, 0)
    f = distance_field(g, o, "graph")
    a = math.radians(22.5)
    q = g.nearest_node(2.5 * math.cos(a), 2.5 * math.sin(a))
    u, v = g.coords(q)
    rel = f[q] / math.hypot(u, v) - 1
    assert 0 < rel <= 0.083


@pytest.mark.parametrize("method", ["graph", "eikonal"])
def test_field_invariants(plane_grid, method):
    o = plane_grid.nearest_node(0.3, -0.2)
    f = distance_field(plane_grid, o, method)
    assert f[o] == 0.0
    w = plane_grid.edge_weights.tocoo()
    gap = np.abs(f.values[w.row] - f.values[w.col]) - w.data
    assert gap.max() <= 1e-12


def test_triangle_within_error_bound(plane_grid, rng):
    nodes = rng.integers(0, plane_grid.n_nodes, 12)
    fields = distance_fields(plane_grid, nodes)
    eb = plane_grid.error_bound
    for i in range(12):
        for j in range(12):
            for k in range(12):
                dik = fields[i][nodes[k]]
                assert dik <= (fields[i][nodes[j]] + fields[j][nodes[k]]) * (1 + 2 * eb) + 1e-12


def test_pairwise_matches_field(rng):
    s = make_surface({"kind": "warped_product", "warp": "1 + r^2", "domain": [-5, 5]})
    g = sample_grid(s, (0.1, 0.1), ((-2, 2), (-3, 3)), 16)
    for _ in range(10):
        p, q = map(int, rng.integers(0, g.n_nodes, 2))
        for m in ("graph", "eikonal"):
            assert pairwise_distance(g, p, q, m) == distance_field(g, p, m)[q]


def test_pairwise_same_node(plane_grid):
    assert pairwise_distance(plane_grid, 7, 7) == 0.0


def test_graph_symmetry_exact(plane_grid, rng):
    for _ in range(100):
        p, q = map(int, rng.integers(0, plane_grid.n_nodes, 2))
        assert pairwise_distance(plane_grid, p, q, "graph") == pairwise_distance(plane_grid, q, p, "graph")


def test_sixteen_not_longer_than_eight(rng):
    ext = ((-2, 2), (-2, 2))
    g8 = sample_grid({"kind": "flat_plane"}, (0.1, 0.1), ext, 8)
    g16 = sample_grid({"kind": "flat_plane"}, (0.1, 0.1), ext, 16)
    for _ in range(20):
        p, q = map(int, rng.integers(0, g8.n_nodes, 2))
        assert pairwise_distance(g16, p, q, "graph") <= pairwise_distance(g8, p, q, "graph") + 1e-12


def test_clairaut_plane():
    s = make_surface({"kind": "warped_product", "warp": "1", "domain": [-10, 10]})
    assert clairaut_distance(s, (0.0, 0.0), (3.0, 4.0)) == pytest.approx(5.0, abs=1e-8)


def test_clairaut_thin_cylinder():
    s = make_surface({"kind": "warped_product", "warp": "0.1", "domain": [-10, 10]})
    assert clairaut_distance(s, (0.0, 0.0), (3.0, 0.0)) == pytest.approx(0.3, abs=1e-8)


def test_clairaut_grapefruit_regression(grapefruit):
    A, C = grapefruit.from_axial(0, -1), grapefruit.from_axial(0, 1)
    d = clairaut_distance(grapefruit, A, C)
    assert d <= math.pi * 0.95
    assert d == pytest.approx(GRAPEFRUIT_AC, abs=1e-8)


def test_grid_agrees_with_oracle_on_grapefruit(grapefruit):
    A, C = grapefruit.from_axial(0, -1), grapefruit.from_axial(0, 1)
    hv = C[1] / 36
    g = sample_grid(grapefruit, (0.04, hv), ((-2, 2), (-54 * hv, 54 * hv)), 16)
    a, c = g.nearest_node(*A, exact=True), g.nearest_node(*C, exact=True)
    rel = pairwise_distance(g, a, c) / GRAPEFRUIT_AC - 1
    assert abs(rel) <= 2 * g.error_bound


def test_field_csv(plane_grid):
    f = distance_field(plane_grid, 0)
    lines = f.to_csv().splitlines()
    assert lines[0] == "u,v,distance"
    assert len(lines) == plane_grid.n_nodes + 1


def test_probe_threads_env(monkeypatch, plane_grid):
    monkeypatch.setenv("HORIZON_PROBE_THREADS", "2")
    assert probe_threads() == 2
    a = distance_fields(plane_grid, [0, 5, 9])
    monkeypatch.setenv("HORIZON_PROBE_THREADS", "1")
    b = distance_fields(plane_grid, [0, 5, 9])
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.values, y.values)
