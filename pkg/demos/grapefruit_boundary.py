"""Why the unwrapped grapefruit-on-a-stick has a Gromov point that no curve reaches.

Walk the lattice points (2 pi n, 0) around the lifted bulge equator. Their
normalized distance functions settle down, so they define a point of the
Gromov compactification. Then ask every natural ray (along the stick, or
radially off the bulge) for its Busemann function and compare.

    python demos/grapefruit_boundary.py
"""

import math

from horizon.boundary import busemann_limit, busemann_truncations, coincidence_test, lattice_ray, probe_fields
from horizon.cosmo import StaticOptions, default_plan

opts = StaticOptions()
plan = default_plan({"kind": "rotational_cover"}, opts)
grid = plan.grid
print(f"grid {grid.shape[1]} x {grid.shape[0]} nodes, stencil error bound {grid.error_bound:.3f}")

probe = plan.probes(opts)
fields = probe_fields(probe)
seq = [grid.nearest_node(2 * math.pi * n, 0.0) for n in range(1, 9)]
rep = coincidence_test(grid, [seq], plan.curve_family, probe, opts.tol, fields=fields)

print("\nquotient steps between consecutive j(x_n):")
print("  " + "  ".join(f"{x:.3f}" for x in rep.sequences[0].increments))
print(f"\n{len(rep.busemann_family)} of {len(rep.curves)} rays have converged Busemann functions")
print(f"closest one is {rep.matches[0].min_distance:.3f} away (separation threshold {rep.separation:.2f})")
print(f"verdict: {rep.verdict}")

# The curve that would have to realize the limit runs along the equator.
# Its length grows like u, its distance from the start like u/10.
bulge = lattice_ray(grid, probe.basepoint, (4, 0), 20, "bulge")
s = busemann_limit(busemann_truncations(grid, bulge, probe, fields=fields), opts.tol, 3)
print(f"\nequator curve: status {s.status}, truncations still rising at {s.lower_slope:.3f} per unit length")
