"""Obstruction verdicts for a few FLRW models.

A finite amount of cosmological time toward either end already rules out
all but essentially null extensions. Otherwise the model is conformal to a
static one, and the verdict comes from the spatial slice.

    python demos/flrw_verdicts.py
"""

from horizon.cosmo import conformal_reduce, flrw_obstruction_report
from horizon.expr import ScaleFactorSpec

models = [
    ("exp(-t)", {"kind": "flat_plane"}),
    ("1", {"kind": "cylinder", "radius": 1.0}),
    ("exp(t) + exp(-t)", {"kind": "flat_plane"}),
    ("1", {"kind": "rotational_cover"}),
]

for expr, slice_ in models:
    spec = ScaleFactorSpec(expr)
    rep = flrw_obstruction_report(spec, slice_)
    print(f"a(t) = {expr:<18} slice {slice_['kind']:<17} -> {rep.verdict} [{rep.verdict_class}]")
    print(f"    provenance: {rep.provenance}, tests: {', '.join(t.name for t in rep.tests_run)}")

red = conformal_reduce(ScaleFactorSpec("exp(t)"))
lo, hi = red.tau_range
print(f"\na(t) = exp(t): conformal time runs over ({lo}, {hi:.6f}), so the future is conformally finite")
