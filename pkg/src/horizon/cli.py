"""``horizon`` command line: run one scene file and write its artifacts.

Exit codes: 0 completed without obstruction (or a non-verdict task
finished), 10 obstructed (conclusive), 11 obstructed (evidence grade),
20 undetermined, 1 error. ``HORIZON_PROBE_THREADS`` caps the threads used
for batches of distance fields.
"""

from __future__ import annotations

import argparse
import sys
import traceback
from pathlib import Path

import numpy as np

from . import __version__
from .artifacts import ArtifactSet, atomic_write, kv_text, line_plot, scatter_plot
from .errors import HorizonError, SceneError
from .scene import FORMATS, Scene, dump_scene, parse_scene

EXIT_ERROR = 1


# ---------------------------------------------------------------------------
# Obstruction tasks
# ---------------------------------------------------------------------------


def _static_options(scene):
    from .cosmo import StaticOptions

    return StaticOptions(**scene.options)


def _export_report(report, out):
    """CSV tables behind an obstruction report."""
    by_name = {t.name: t for t in report.tests_run}
    ends = by_name.get("ends")
    if ends is not None and ends.grade != "failed":
        out.csv(
            "ends.csv",
            ["radius", "components"],
            zip(ends.evidence["radii"], ends.evidence["profile"]),
        )
    integrals = [t for t in report.tests_run if t.name.startswith("integral_")]
    if integrals:
        out.csv(
            "integrals.csv",
            ["end", "status", "value", "remainder", "start", "method"],
            [
                [t.name.removeprefix("integral_"), t.outcome, *(t.evidence.get(k) for k in ("value", "remainder", "start", "method"))]
                for t in integrals
            ],
        )
    co = by_name.get("coincidence")
    if co is None or co.detail is None:
        return
    rep = co.detail
    probe = rep.curves[0].probe if rep.curves else None
    if probe is not None:
        grid = probe.grid
        coords = [grid.coords(p) for p in probe.points]
        out.csv(
            "gromov.csv",
            ["limit", "probe", "u", "v", "value"],
            (
                [i, p, u, v, float(val)]
                for i, g in enumerate(rep.gromov_limits)
                for p, (u, v), val in zip(probe.points, coords, g.values)
            ),
        )
    out.csv(
        "busemann.csv",
        ["curve", "label", "status", "final_increment", "lower_slope"],
        ([j, s.curve.label, s.status, s.final_increment, s.lower_slope] for j, s in enumerate(rep.curves)),
    )
    out.csv(
        "sequences.csv",
        ["sequence", "step", "increment"],
        ([t.index, k + 1, x] for t in rep.sequences for k, x in enumerate(t.increments)),
    )
    rows = []
    for j, s in enumerate(rep.curves):
        b = s.probe.base_index
        for k, (t, val) in enumerate(zip(s.curve.params, s.truncations[b])):
            rows.append([j, s.curve.label, k, float(t), float(val)])
    text = out.csv("truncations.csv", ["curve", "label", "sample", "t", "truncation"], rows)
    out.svg(
        "truncations.svg",
        lambda: line_plot(text, "t", "truncation", "label", "truncations at the basepoint probe"),
    )


def run_static(scene, out):
    from .cosmo import static_obstruction_report

    report = static_obstruction_report(scene["slice"], _static_options(scene))
    _export_report(report, out)
    return report.exit_code, report.as_pairs()


def run_flrw(scene, out):
    from .cosmo import flrw_obstruction_report
    from .expr import ScaleFactorSpec

    sf = scene["scale_factor"]
    spec = ScaleFactorSpec(sf["expression"], tuple(sf["domain"]))
    report = flrw_obstruction_report(spec, scene["slice"], _static_options(scene))
    _export_report(report, out)
    return report.exit_code, report.as_pairs()


# ---------------------------------------------------------------------------
# Study tasks
# ---------------------------------------------------------------------------


def run_ip_metrics(scene, out):
    from . import ipspace as ip
    from .surfaces import sample_grid

    g, m, opts = scene["grid"], scene["metrics"], scene.options
    slice_grid = sample_grid(scene["slice"], g["spacing"], g["extent"], 16)
    cg = ip.build_causal_grid(slice_grid, g["time_count"], g["time_step"], g["slack"])
    w = ip.build_weights(cg, m["weights"])
    cfg = ip.TimeFunctionConfig()
    rng = np.random.default_rng(opts["seed"])
    pairs = [(ip.random_past_set(cg, rng, m["max_generators"]), ip.random_past_set(cg, rng, m["max_generators"])) for _ in range(m["pairs"])]
    text = ip.metrics_csv(cg, w, cfg, pairs)
    if out.wants("csv"):
        out.add("metrics.csv", text)
        out.add("pair0_a.rle", pairs[0][0].to_rle())
        out.add("pair0_b.rle", pairs[0][1].to_rle())
    out.svg("metrics.svg", lambda: scatter_plot(text, "delta", "d", "d against delta"))
    rows = np.array([[float(x) for x in line.split(",")[1:3]] for line in text.splitlines()[1:]])
    gap = rows[:, 1] - rows[:, 0]
    pairs_kv = [
        ("layers", g["time_count"]),
        ("slice_nodes", cg.n_slice),
        ("cells", cg.n_cells),
        ("slack", repr(cg.slack)),
        ("synoptic", str(cg.synoptic).lower()),
        ("weights", m["weights"]),
        ("time_function", cfg.name),
        ("pairs", len(pairs)),
        ("delta_max", repr(float(rows[:, 0].max()))),
        ("d_max", repr(float(rows[:, 1].max()))),
        ("d_minus_delta_min", repr(float(gap.min()))),
        ("d_strictly_greater", int(np.sum(gap > 0))),
    ]
    return 0, pairs_kv


def run_busemann(scene, out):
    from .boundary import ball_probes, busemann_limit, busemann_truncations, lattice_ray
    from .surfaces import sample_grid

    g, c, p, opts = scene["grid"], scene["curve"], scene["probes"], scene.options
    grid = sample_grid(scene["slice"], g["spacing"], g["extent"], g["neighborhood_order"])
    center = grid.nearest_node(*p["center"])
    probe = ball_probes(grid, center, p["radius"], opts["probe_count"], seed=opts["seed"], method=opts["method"])
    curve = lattice_ray(grid, grid.nearest_node(*c["start"]), c["step"], c["count"], "study")
    s = busemann_limit(busemann_truncations(grid, curve, probe, opts["method"]), opts["tol"], opts["window"])
    coords = [grid.coords(x) for x in probe.points]
    rows = [
        [i, x, u, v, k, float(t), float(s.truncations[i, k])]
        for i, (x, (u, v)) in enumerate(zip(probe.points, coords))
        for k, t in enumerate(curve.params)
    ]
    text = out.csv("truncations.csv", ["probe", "node", "u", "v", "sample", "t", "truncation"], rows)
    out.csv(
        "busemann.csv",
        ["probe", "node", "u", "v", "busemann"],
        ([i, x, u, v, float(b)] for i, (x, (u, v), b) in enumerate(zip(probe.points, coords, s.busemann))),
    )
    out.svg("truncations.svg", lambda: line_plot(text, "t", "truncation", "probe", "truncations per probe"))
    kv = [
        ("status", s.status),
        ("final_increment", repr(s.final_increment)),
        ("lower_slope", repr(s.lower_slope)),
        ("monotonicity_defect", repr(s.monotonicity_defect())),
        ("error_bound", repr(s.error_bound)),
        ("curve_length", repr(float(curve.params[-1]))),
        ("probe_count", len(probe.points)),
    ]
    return 0, kv


def run_warped(scene, out):
    from ._integrals import default_start, integral_converges, resolve_end
    from .boundary import classify_warped_boundary
    from .expr import ScaleFactorSpec

    wp = scene["warp"]
    spec = ScaleFactorSpec(wp["expression"], tuple(wp["domain"]))
    label = classify_warped_boundary(spec, wp["end"], wp["split_point"])
    end = resolve_end(spec, wp["end"])
    start = default_start(spec, end) if wp["split_point"] is None else wp["split_point"]
    v = integral_converges(spec, "reciprocal_square", end, start=start)
    out.csv(
        "classification.csv",
        ["end", "split_point", "classification", "status", "value", "method"],
        [[wp["end"], start, label, v.status, v.value, v.method]],
    )
    kv = [
        ("warp", wp["expression"]),
        ("end", wp["end"]),
        ("split_point", repr(float(start))),
        ("classification", label),
        ("reciprocal_square_integral", v.status),
        ("integral_value", "none" if v.value is None else repr(v.value)),
        ("integral_method", v.method),
    ]
    return 0, kv


HANDLERS = {
    "static_obstruction": run_static,
    "flrw_obstruction": run_flrw,
    "ip_metrics": run_ip_metrics,
    "busemann_study": run_busemann,
    "warped_classify": run_warped,
}


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------


def _error_pairs(exc, scene=None):
    pairs = [("status", "error"), ("exit_code", EXIT_ERROR)]
    if scene is not None:
        pairs += [("scene", scene.name), ("task", scene.task)]
    pairs += [("error_type", type(exc).__name__), ("message", str(exc).replace("\n", " "))]
    if isinstance(exc, SceneError):
        pairs += [(k, getattr(exc, k)) for k in ("key", "line", "column") if getattr(exc, k) is not None]
    return pairs


def run(scene: Scene):
    """Run a validated scene. Returns ``(exit_code, written_paths)``."""
    out = ArtifactSet(scene.output["directory"], scene.output["formats"])
    try:
        code, pairs = HANDLERS[scene.task](scene, out)
    except HorizonError as exc:
        text = kv_text(_error_pairs(exc, scene))
        if out.wants("report"):
            atomic_write(Path(scene.output["directory"]) / "error.txt", text)
        sys.stderr.write(text)
        return EXIT_ERROR, []
    head = [("scene", scene.name), ("task", scene.task), ("exit_code", code)]
    out.report(head + list(pairs))
    if out.wants("report"):
        out.add("scene.yaml", dump_scene(scene))
    written = out.commit()
    sys.stdout.write(kv_text(head + list(pairs)))
    return code, written


def build_parser():
    p = argparse.ArgumentParser(prog="horizon", description="Causal-boundary obstruction experiments.")
    p.add_argument("--scene", required=True, type=Path, help="scene file (YAML)")
    p.add_argument("--out-dir", type=Path, help="output directory (overrides output.directory)")
    p.add_argument("--seed", type=int, help="random seed (overrides options.seed)")
    p.add_argument("--tol", type=float, help="tolerance (overrides options.tol)")
    p.add_argument("--resolution", type=int, help="grid resolution (overrides options.resolution)")
    p.add_argument("--emit", help=f"comma-separated subset of {','.join(FORMATS)}")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        scene = parse_scene(args.scene).with_overrides(
            seed=args.seed, tol=args.tol, resolution=args.resolution, out_dir=args.out_dir, formats=args.emit
        )
    except SceneError as exc:
        sys.stderr.write(kv_text(_error_pairs(exc)))
        return EXIT_ERROR
    try:
        code, _ = run(scene)
    except Exception as exc:  # unexpected failures still map to exit 1
        sys.stderr.write(kv_text(_error_pairs(exc, scene)))
        traceback.print_exc(file=sys.stderr)
        return EXIT_ERROR
    return code


if __name__ == "__main__":
    sys.exit(main())
