import math
from pathlib import Path

import pytest

from horizon.errors import SceneParseError, SceneValidationError
from horizon.scene import dump_scene, loads_scene, parse_scene

SCENES = sorted((Path(__file__).parent / "scenes").glob("*.yaml"))


def test_minimal_flrw_defaults():
    s = loads_scene("task: flrw_obstruction\nscale_factor: {expression: exp(-t)}\nslice: {kind: flat_plane}\n")
    assert s.name == "flrw_obstruction"
    assert s["scale_factor"]["domain"] == [-math.inf, math.inf]
    assert s.options == {
        "resolution": None,
        "tol": 0.05,
        "probe_count": 50,
        "seed": 0,
        "method": "eikonal",
        "window": 3,
        "tail": 2,
    }
    assert s.output == {"directory": "out", "formats": ["csv", "report"]}


def test_negative_resolution():
    text = "task: static_obstruction\nslice: {kind: flat_plane}\noptions:\n  resolution: -4\n"
    with pytest.raises(SceneValidationError) as info:
        loads_scene(text)
    assert info.value.key == "options.resolution"
    assert (info.value.line, info.value.column) == (4, 3)


def test_unknown_key_location():
    text = "task: static_obstruction\nslice:\n  kind: flat_plane\n  colour: red\n"
    with pytest.raises(SceneValidationError) as info:
        loads_scene(text)
    assert info.value.key == "slice.colour"
    assert (info.value.line, info.value.column) == (4, 3)


def test_bad_expression_is_validation_error():
    with pytest.raises(SceneValidationError) as info:
        loads_scene("task: warped_classify\nwarp: {expression: 'r +* 2'}\n")
    assert info.value.key == "warp.expression"


def test_parse_error_has_position():
    with pytest.raises(SceneParseError) as info:
        loads_scene("task: [static_obstruction\nslice: {kind: flat_plane}\n")
    assert info.value.line is not None


def test_missing_file():
    with pytest.raises(SceneParseError):
        parse_scene("/nonexistent/scene.yaml")


def test_missing_required_section():
    with pytest.raises(SceneValidationError) as info:
        loads_scene("task: flrw_obstruction\nslice: {kind: flat_plane}\n")
    assert info.value.key == "scale_factor"


@pytest.mark.parametrize("path", SCENES, ids=[p.stem for p in SCENES])
def test_golden_round_trip(path):
    s = parse_scene(path)
    text = dump_scene(s)
    again = loads_scene(text)
    assert again == s
    assert dump_scene(again) == text


def test_overrides():
    s = parse_scene(SCENES[0])
    o = s.with_overrides(seed=3, tol=0.1, resolution=8, out_dir="x", formats="csv,svg")
    assert (o.options["seed"], o.options["tol"], o.options["resolution"]) == (3, 0.1, 8)
    assert o.output == {"directory": "x", "formats": ["csv", "svg"]}
    with pytest.raises(SceneValidationError):
        s.with_overrides(formats="csv,bogus")
    with pytest.raises(SceneValidationError):
        s.with_overrides(resolution=0)
