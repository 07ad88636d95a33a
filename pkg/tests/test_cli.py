import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from horizon.cli import main

SCENES = Path(__file__).parent / "scenes"


def _kv(path):
    return dict(line.split(" = ", 1) for line in Path(path).read_text().splitlines())


def test_exp_decay_scene(tmp_path):
    code = main(["--scene", str(SCENES / "flrw_exp_decay.yaml"), "--out-dir", str(tmp_path)])
    assert code == 10
    rep = _kv(tmp_path / "report.txt")
    assert rep["verdict"] == "obstructed_essentially_null"
    assert rep["provenance"] == "flrw_finite_time_integral"
    assert float(rep["integral_future.value"]) == pytest.approx(1.0, abs=1e-6)
    assert sorted(p.name for p in tmp_path.iterdir()) == ["integrals.csv", "report.txt", "scene.yaml"]


def test_cylinder_scene(tmp_path):
    assert main(["--scene", str(SCENES / "cylinder_static.yaml"), "--out-dir", str(tmp_path)]) == 10
    assert (tmp_path / "ends.csv").read_text().splitlines()[0] == "radius,components"


@pytest.fixture(scope="module")
def grapefruit_runs(tmp_path_factory):
    dirs = [tmp_path_factory.mktemp(f"gf{i}") for i in range(2)]
    codes = [main(["--scene", str(SCENES / "grapefruit_static.yaml"), "--out-dir", str(d)]) for d in dirs]
    return codes, dirs


def test_grapefruit_scene(grapefruit_runs):
    codes, (a, _) = grapefruit_runs
    assert codes == [11, 11]
    rep = _kv(a / "report.txt")
    assert rep["provenance"] == "busemann_gromov_mismatch"
    assert rep["conclusive"] == "false"
    for name in ("busemann.csv", "gromov.csv", "sequences.csv", "truncations.csv", "truncations.svg"):
        assert (a / name).exists()


def test_reruns_are_byte_identical(grapefruit_runs):
    _, (a, b) = grapefruit_runs
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    for n in names:
        if n in ("scene.yaml",):
            continue
        assert (a / n).read_bytes() == (b / n).read_bytes(), n


def test_study_tasks(tmp_path):
    for scene, files in [
        ("ip_metrics.yaml", {"metrics.csv", "pair0_a.rle", "pair0_b.rle"}),
        ("busemann_plane.yaml", {"truncations.csv", "busemann.csv"}),
        ("warped_sqrt.yaml", {"classification.csv"}),
    ]:
        out = tmp_path / scene
        assert main(["--scene", str(SCENES / scene), "--out-dir", str(out)]) == 0
        assert files <= {p.name for p in out.iterdir()}
    assert _kv(tmp_path / "warped_sqrt.yaml" / "report.txt")["classification"] == "Point"
    assert _kv(tmp_path / "busemann_plane.yaml" / "report.txt")["status"] == "converged"


def test_bad_scene_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("task: static_obstruction\nslice: {kind: torus}\n")
    assert main(["--scene", str(bad), "--out-dir", str(tmp_path / "out")]) == 1
    err = capsys.readouterr().err
    assert "key = slice.kind" in err and "line = 2" in err
    assert not (tmp_path / "out").exists()


def test_bad_emit_exits_1(tmp_path):
    assert main(["--scene", str(SCENES / "warped_sqrt.yaml"), "--out-dir", str(tmp_path), "--emit", "csv,bogus"]) == 1


def test_failed_run_writes_only_error(tmp_path):
    scene = tmp_path / "fail.yaml"
    # a probe ball far too small for the requested probe count
    scene.write_text(
        "task: busemann_study\nprobes: {radius: 0.01}\noptions: {probe_count: 40}\n"
        f"output: {{directory: {tmp_path / 'out'}, formats: [csv, svg, report]}}\n"
    )
    assert main(["--scene", str(scene)]) == 1
    out = tmp_path / "out"
    assert [p.name for p in out.iterdir()] == ["error.txt"]
    err = _kv(out / "error.txt")
    assert err["status"] == "error" and err["error_type"] == "InvalidParameter"


def test_emit_controls_outputs(tmp_path):
    assert main(["--scene", str(SCENES / "warped_sqrt.yaml"), "--out-dir", str(tmp_path), "--emit", "report"]) == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == ["report.txt", "scene.yaml"]


def test_svg_is_deterministic(tmp_path):
    pytest.importorskip("matplotlib")
    outs = []
    for i in range(2):
        d = tmp_path / str(i)
        main(["--scene", str(SCENES / "busemann_plane.yaml"), "--out-dir", str(d), "--emit", "svg"])
        outs.append((d / "truncations.svg").read_bytes())
    assert outs[0] == outs[1]
    assert outs[0].lstrip().startswith(b"<?xml")


@pytest.mark.skipif(shutil.which("horizon") is None, reason="console script not installed")
def test_console_script(tmp_path):
    r = subprocess.run(
        ["horizon", "--scene", str(SCENES / "warped_sqrt.yaml"), "--out-dir", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert r.returncode == 0
    assert "classification = Point" in r.stdout


def test_module_entry_version():
    r = subprocess.run([sys.executable, "-m", "horizon.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("horizon ")
