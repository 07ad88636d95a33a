"""The past-set metrics on a small causal grid, and where they break.

Builds a 6-layer grid over a 16 x 16 flat slice, draws random past sets and
tabulates delta, d and the two time functions. The last part shows a nested
triple for which delta violates the triangle inequality: -ln(1 - x) is
convex and vanishes at 0, so it is superadditive on disjoint increments.

    python demos/causal_grid_metrics.py
"""

import math

import numpy as np

from horizon import ipspace as ip
from horizon.surfaces import sample_grid

slice_ = sample_grid({"kind": "flat_plane"}, (1.0, 1.0), ((0, 15), (0, 15)), 16)
g = ip.build_causal_grid(slice_, 6, 1.0)
w = ip.build_weights(g, "layered")
cfg = ip.TimeFunctionConfig()
rng = np.random.default_rng(0)
print(f"{g.n_cells} cells, slack {g.slack:.4f}, synoptic {g.synoptic}")

print("\n  delta       d        t(A)     T(A)")
for _ in range(6):
    A, B = ip.random_past_set(g, rng), ip.random_past_set(g, rng)
    print(
        f"  {ip.delta_metric(g, w, A, B):.4f}  {ip.d_metric(g, w, A, B):.4f}"
        f"  {ip.time_t(g, w, cfg, A):8.4f}  {ip.time_T(g, w, cfg, A):8.4f}"
    )

x = slice_.nearest_node(7, 7)
A, B, C = (ip.past(g, g.cell(i, x)) for i in (3, 4, 5))
ab, bc, ac = (ip.delta_metric(g, w, *p) for p in ((A, B), (B, C), (A, C)))
print(f"\nnested pasts along a vertical chain: delta(A,B) + delta(B,C) = {ab + bc:.4f}, delta(A,C) = {ac:.4f}")
a, b = 0.3, 0.3
print(f"closed form: -ln(1-{a + b}) = {-math.log(1 - a - b):.4f} > 2 * -ln(1-{a}) = {-2 * math.log(1 - a):.4f}")
