"""Scene files: a YAML key-value tree describing one experiment.

A scene names a ``task`` and carries the sections that task needs. Every
section has a fixed key set; an unknown or misspelled key is an error that
points at its line and column. Defaults are filled in at parse time, so a
parsed scene is complete and :func:`dump_scene` writes it back verbatim.

Example::

    name: grapefruit
    task: static_obstruction
    slice:
      kind: rotational_cover
    options:
      resolution: 20
      seed: 0
    output:
      directory: out/grapefruit
      formats: [csv, report]
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import SceneParseError, SceneValidationError

TASKS = ("static_obstruction", "flrw_obstruction", "ip_metrics", "busemann_study", "warped_classify")
FORMATS = ("csv", "svg", "report")
REQUIRED = object()


# ---------------------------------------------------------------------------
# Value checkers: each takes (value, key) and returns the normalized value.
# ---------------------------------------------------------------------------


def _fail(key, msg):
    raise SceneValidationError(msg, key=key)


def _real(value, key):
    if isinstance(value, bool):
        _fail(key, "expected a number")
    if isinstance(value, str) and value.strip().lower() in ("inf", "+inf", "-inf", "infinity", "-infinity"):
        return float(value)
    if not isinstance(value, (int, float)):
        _fail(key, f"expected a number, got {value!r}")
    return float(value)


def _finite(value, key):
    x = _real(value, key)
    if not math.isfinite(x):
        _fail(key, "must be finite")
    return x


def _positive(value, key):
    x = _finite(value, key)
    if not x > 0:
        _fail(key, f"must be positive, got {x:g}")
    return x


def _integer(lo):
    def check(value, key):
        if isinstance(value, bool) or not isinstance(value, int):
            _fail(key, f"expected an integer, got {value!r}")
        if value < lo:
            _fail(key, f"must be at least {lo}, got {value}")
        return int(value)

    return check


def _optional(check):
    def inner(value, key):
        return None if value is None else check(value, key)

    return inner


def _choice(*options):
    def check(value, key):
        if value not in options:
            _fail(key, f"must be one of {', '.join(map(str, options))}; got {value!r}")
        return value

    return check


def _text(value, key):
    if not isinstance(value, str) or not value.strip():
        _fail(key, "expected a non-empty string")
    return value


def _flag(value, key):
    if not isinstance(value, bool):
        _fail(key, "expected true or false")
    return value


def _pair(check):
    def inner(value, key):
        if not isinstance(value, (list, tuple)) or len(value) != 2:
            _fail(key, "expected a two-element list")
        return [check(v, f"{key}[{i}]") for i, v in enumerate(value)]

    return inner


def _interval(value, key):
    lo, hi = _pair(_real)(value, key)
    if not lo < hi:
        _fail(key, "interval must be increasing")
    return [lo, hi]


def _extent(value, key):
    return [_interval(v, f"{key}[{i}]") for i, v in enumerate(_pair(lambda v, k: v)(value, key))]


def _lattice_step(value, key):
    step = _pair(_integer(-(10**9)))(value, key)
    if step == [0, 0]:
        _fail(key, "lattice step must be nonzero")
    return step


def _formats(value, key):
    if isinstance(value, str):
        value = [v.strip() for v in value.split(",") if v.strip()]
    if not isinstance(value, (list, tuple)) or not value:
        _fail(key, "expected a non-empty list drawn from csv, svg, report")
    out = []
    for v in value:
        _choice(*FORMATS)(v, key)
        if v not in out:
            out.append(v)
    return sorted(out, key=FORMATS.index)


# ---------------------------------------------------------------------------
# Section schemas: key -> (checker, default)
# ---------------------------------------------------------------------------

SURFACE_KINDS = {
    "flat_plane": {},
    "rotational_cover": {
        "stick_radius": (_positive, 0.1),
        "blend_parameter": (_positive, 0.05),
        "unwrapped": (_flag, True),
        "resolution": (_integer(16), 512),
    },
    "warped_product": {
        "warp": (_text, REQUIRED),
        "domain": (_interval, [-math.inf, math.inf]),
        "fiber_circumference": (_positive, 2 * math.pi),
    },
    "cylinder": {"radius": (_positive, 1.0)},
}

SCALE_FACTOR = {"expression": (_text, REQUIRED), "domain": (_interval, [-math.inf, math.inf])}

WARP = {
    "expression": (_text, REQUIRED),
    "domain": (_interval, [-math.inf, math.inf]),
    "end": (_choice("alpha", "omega"), "omega"),
    "split_point": (_optional(_finite), None),
}

OPTIONS = {
    "resolution": (_optional(_integer(1)), None),
    "tol": (_positive, 0.05),
    "probe_count": (_integer(2), 50),
    "seed": (_integer(0), 0),
    "method": (_choice("eikonal", "graph"), "eikonal"),
    "window": (_integer(2), 3),
    "tail": (_integer(1), 2),
}

OUTPUT = {"directory": (_text, "out"), "formats": (_formats, ["csv", "report"])}

CAUSAL_GRID = {
    "time_count": (_integer(2), 6),
    "time_step": (_positive, 1.0),
    "spacing": (_pair(_positive), [1.0, 1.0]),
    "extent": (_extent, [[-7.5, 7.5], [-7.5, 7.5]]),
    "slack": (_optional(_finite), None),
}

METRICS = {
    "pairs": (_integer(1), 1000),
    "weights": (_choice("uniform", "layered"), "layered"),
    "max_generators": (_integer(1), 3),
}

STUDY_GRID = {
    "spacing": (_pair(_positive), [0.05, 0.05]),
    "extent": (_extent, [[-2.0, 40.0], [-2.0, 2.0]]),
    "neighborhood_order": (_choice(8, 16), 16),
}

CURVE = {
    "start": (_pair(_finite), [0.0, 0.0]),
    "step": (_lattice_step, [40, 0]),
    "count": (_integer(3), 20),
}

PROBES = {"center": (_pair(_finite), [0.0, 0.0]), "radius": (_positive, 1.0)}

# task -> {section: (schema, required)}; ``slice`` is validated per surface kind
TASK_SECTIONS = {
    "static_obstruction": {"slice": (None, True)},
    "flrw_obstruction": {"scale_factor": (SCALE_FACTOR, True), "slice": (None, True)},
    "ip_metrics": {"slice": (None, False), "grid": (CAUSAL_GRID, False), "metrics": (METRICS, False)},
    "busemann_study": {
        "slice": (None, False),
        "grid": (STUDY_GRID, False),
        "curve": (CURVE, False),
        "probes": (PROBES, False),
    },
    "warped_classify": {"warp": (WARP, True)},
}

DEFAULT_SLICE = {"kind": "flat_plane"}


# ---------------------------------------------------------------------------
# Scene
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Scene:
    """A validated scene with every default filled in."""

    name: str
    task: str
    sections: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    def __getitem__(self, section):
        return self.sections[section]

    def to_dict(self):
        out = {"name": self.name, "task": self.task}
        out.update(copy.deepcopy(self.sections))
        out["options"] = dict(self.options)
        out["output"] = copy.deepcopy(self.output)
        return out

    def with_overrides(self, *, seed=None, tol=None, resolution=None, out_dir=None, formats=None):
        """Copy with command-line overrides applied and validated."""
        opts, outp = dict(self.options), copy.deepcopy(self.output)
        for key, value in (("seed", seed), ("tol", tol), ("resolution", resolution)):
            if value is not None:
                opts[key] = OPTIONS[key][0](value, f"options.{key}")
        if out_dir is not None:
            outp["directory"] = _text(str(out_dir), "output.directory")
        if formats is not None:
            outp["formats"] = _formats(formats, "output.formats")
        return Scene(self.name, self.task, copy.deepcopy(self.sections), opts, outp)


def _marks(node, path=(), out=None):
    """Map key paths to 1-based (line, column) of the key in the source."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            p = path + (str(k.value),)
            out[p] = (k.start_mark.line + 1, k.start_mark.column + 1)
            _marks(v, p, out)
    return out


def _section(raw, schema, prefix):
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        _fail(prefix, "expected a mapping")
    for k in raw:
        if k not in schema:
            _fail(f"{prefix}.{k}", f"unknown key; allowed: {', '.join(schema) or 'none'}")
    out = {}
    for k, (check, default) in schema.items():
        if k in raw:
            out[k] = check(raw[k], f"{prefix}.{k}")
        elif default is REQUIRED:
            _fail(f"{prefix}.{k}", "required key is missing")
        else:
            out[k] = copy.deepcopy(default)
    return out


def _slice(raw, prefix="slice"):
    if raw is None:
        raw = dict(DEFAULT_SLICE)
    if not isinstance(raw, dict):
        _fail(prefix, "expected a mapping with a 'kind' key")
    kind = raw.get("kind")
    if kind not in SURFACE_KINDS:
        _fail(f"{prefix}.kind", f"must be one of {', '.join(SURFACE_KINDS)}; got {kind!r}")
    rest = {k: v for k, v in raw.items() if k != "kind"}
    return {"kind": kind, **_section(rest, SURFACE_KINDS[kind], prefix)}


def _validate(data):
    if not isinstance(data, dict):
        _fail("<root>", "scene must be a mapping")
    task = data.get("task")
    if task is None:
        _fail("task", "required key is missing")
    _choice(*TASKS)(task, "task")
    allowed = {"name", "task", "options", "output", *TASK_SECTIONS[task]}
    for k in data:
        if k not in allowed:
            _fail(str(k), f"unknown key for task {task}; allowed: {', '.join(sorted(allowed))}")
    name = _text(data.get("name", task), "name")
    sections = {}
    for sec, (schema, required) in TASK_SECTIONS[task].items():
        raw = data.get(sec)
        if raw is None and required:
            _fail(sec, "required section is missing")
        sections[sec] = _slice(raw) if schema is None else _section(raw, schema, sec)
    options = _section(data.get("options"), OPTIONS, "options")
    output = _section(data.get("output"), OUTPUT, "output")
    return Scene(name, task, sections, options, output)


def _check_semantics(scene):
    """Cheap checks against the target modules so errors surface before any work."""
    from .expr import ScaleFactorSpec
    from .surfaces import make_surface

    def attempt(key, fn):
        try:
            fn()
        except SceneValidationError:
            raise
        except Exception as exc:
            _fail(key, str(exc))

    for sec in ("scale_factor", "warp"):
        if sec in scene.sections:
            s = scene[sec]
            attempt(f"{sec}.expression", lambda s=s: ScaleFactorSpec(s["expression"], tuple(s["domain"])))
    if "slice" in scene.sections:
        attempt("slice", lambda: make_surface(scene["slice"]))
    if scene.task == "busemann_study":
        (u0, u1), (v0, v1) = scene["grid"]["extent"]
        for key in ("curve.start", "probes.center"):
            sec, k = key.split(".")
            u, v = scene[sec][k]
            if not (u0 <= u <= u1 and v0 <= v <= v1):
                _fail(key, "point lies outside the grid extent")


def loads_scene(text, source="<string>"):
    """Parse and validate scene text."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        raise SceneParseError(
            f"{source}: {exc.problem or 'malformed YAML'}",
            line=mark.line + 1 if mark else None,
            column=mark.column + 1 if mark else None,
        ) from None
    except yaml.YAMLError as exc:
        raise SceneParseError(f"{source}: {exc}") from None
    marks = _marks(node) if node is not None else {}
    try:
        scene = _validate(data if data is not None else {})
        _check_semantics(scene)
    except SceneValidationError as exc:
        key = exc.key or ""
        path = tuple(key.split("[")[0].split("."))
        while path and path not in marks:
            path = path[:-1]
        line, col = marks.get(path, (None, None))
        raise SceneValidationError(
            f"{source}: {exc.message}", key=exc.key, line=line, column=col
        ) from None
    return scene


def parse_scene(path):
    """Read, parse and validate a scene file."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise SceneParseError(f"cannot read scene file {p}: {exc.strerror}") from None
    return loads_scene(text, str(p))


def dump_scene(scene):
    """YAML text that parses back to an equal scene."""
    return yaml.safe_dump(scene.to_dict(), sort_keys=False, default_flow_style=None, allow_unicode=True)
