import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from horizon.cosmo import (
    EXIT_CODES,
    ObstructionReport,
    StaticOptions,
    TestOutcome as Outcome,
    conformal_reduce,
    default_plan,
    flrw_obstruction_report,
    integral_converges,
    static_obstruction_report,
)
from horizon.errors import InvalidParameter, NonpositiveIntegrand
from horizon.expr import ScaleFactorSpec

CYLINDER = {"kind": "cylinder", "radius": 1.0}
PLANE = {"kind": "flat_plane"}
GRAPEFRUIT = {"kind": "rotational_cover"}


def test_exp_decay_integral_is_one():
    v = integral_converges(ScaleFactorSpec("exp(-t)"), "identity", math.inf, start=0.0)
    assert v.status == "finite"
    assert v.value == pytest.approx(1.0, abs=1e-8)
    assert v.remainder <= 1e-8


@pytest.mark.parametrize("p,status", [(0.7, "finite"), (0.5, "infinite"), (2.0, "finite"), (0.3, "infinite")])
def test_reciprocal_square_threshold(p, status):
    s = ScaleFactorSpec(f"r^{p}", (1, math.inf))
    assert integral_converges(s, "reciprocal_square", "omega", start=1.5).status == status


def test_constant_is_infinite():
    assert integral_converges(ScaleFactorSpec("1"), "identity", math.inf).status == "infinite"


def test_methods_agree():
    s = ScaleFactorSpec("1/(1+t^2)", (0, math.inf))
    a = integral_converges(s, "identity", math.inf, start=1.0)
    b = integral_converges(s, "identity", math.inf, start=1.0, method="quadrature_with_tail_bound")
    assert a.method == "asymptotic_rule" and b.method == "quadrature_with_tail_bound"
    assert a.status == b.status == "finite"
    assert a.value == pytest.approx(math.pi / 4, abs=1e-7)
    assert b.value == pytest.approx(math.pi / 4, abs=1e-6)


@given(st.floats(0.25, 4.0))
def test_scaling_covariance(c):
    base = integral_converges(ScaleFactorSpec("exp(-2*t)"), "identity", math.inf, start=0.0)
    scaled = integral_converges(ScaleFactorSpec("exp(-2*t)").scaled(c), "identity", math.inf, start=0.0)
    assert scaled.value == pytest.approx(c * base.value, rel=1e-7)


def test_bad_transform():
    with pytest.raises(InvalidParameter):
        integral_converges(ScaleFactorSpec("1"), "square")


def test_nonpositive_integrand():
    with pytest.raises((NonpositiveIntegrand, InvalidParameter)):
        integral_converges(ScaleFactorSpec("piecewise(1, 3, 0 - 1)"), "identity", math.inf)


def test_conformal_time_of_constant():
    red = conformal_reduce(ScaleFactorSpec("1"))
    assert red.tau_range == (-math.inf, math.inf)
    t = np.array([-3.0, 0.5, 2.0])
    np.testing.assert_allclose(red(t), t - red.origin, atol=1e-12)


def test_conformal_time_of_exponential():
    red = conformal_reduce(ScaleFactorSpec("exp(t)"))
    lo, hi = red.tau_range
    assert lo == -math.inf
    assert hi == pytest.approx(math.exp(-red.origin), abs=1e-8)
    assert red(1.0) - red(0.0) == pytest.approx(1 - math.exp(-1), abs=1e-6)


@given(st.floats(0.1, 3), st.floats(-1.5, 1.5), st.floats(0.1, 2))
def test_conformal_table_monotone(c, k, m):
    red = conformal_reduce(ScaleFactorSpec(f"{c!r} * exp({k!r} * t) + {m!r}"))
    assert np.all(np.diff(red.tau) >= 0)
    assert np.all(np.diff(red.t) > 0)


def test_report_format_and_exit_codes():
    ends = Outcome("ends", "2 ends", "conclusive", True, {"count": 2})
    rep = ObstructionReport("standard_static", (ends,), "obstructed_extension", True, "ends_criterion")
    assert rep.exit_code == EXIT_CODES["conclusive"] == 10
    text = rep.to_text()
    assert text.splitlines()[0] == "input_kind = standard_static"
    assert "ends.count = 2" in text
    assert "ends.fired = true" in text
    assert ObstructionReport("flrw", (), "undetermined", False).exit_code == 20
    assert ObstructionReport("flrw", (), "no_obstruction_found", False).exit_code == 0


def test_options_validation():
    with pytest.raises(InvalidParameter):
        StaticOptions(resolution=-1)
    with pytest.raises(InvalidParameter):
        StaticOptions(tol=0)


def test_cylinder_has_two_ends():
    rep = static_obstruction_report(CYLINDER)
    assert rep.verdict == "obstructed_extension"
    assert rep.conclusive and rep.provenance == "ends_criterion"
    assert [t.name for t in rep.tests_run] == ["ends"]
    assert rep.exit_code == 10


def test_plane_has_no_obstruction():
    rep = static_obstruction_report(PLANE)
    assert rep.verdict == "no_obstruction_found"
    assert rep.exit_code == 0
    co = rep.tests_run[1]
    assert co.outcome == "coincide_on_sample"


@pytest.fixture(scope="module")
def grapefruit_report():
    return static_obstruction_report(GRAPEFRUIT)


def test_grapefruit_is_evidence_grade(grapefruit_report):
    rep = grapefruit_report
    assert rep.verdict == "obstructed_extension"
    assert not rep.conclusive
    assert rep.provenance == "busemann_gromov_mismatch"
    assert rep.exit_code == 11
    assert [t.grade for t in rep.tests_run] == ["conclusive", "evidence"]


def test_failed_ends_gives_undetermined():
    opts = StaticOptions()
    plan = dataclasses.replace(default_plan(CYLINDER, opts), radii=(1.0, 8.0))
    rep = static_obstruction_report(CYLINDER, opts, plan)
    assert rep.verdict == "undetermined"
    assert rep.tests_run[0].grade == "failed"
    assert rep.exit_code == 20


def test_flrw_finite_time():
    rep = flrw_obstruction_report(ScaleFactorSpec("exp(-t)"), PLANE)
    assert rep.verdict == "obstructed_essentially_null"
    assert rep.conclusive and rep.provenance == "flrw_finite_time_integral"
    fut = [t for t in rep.tests_run if t.name == "integral_future"][0]
    assert fut.evidence["value"] == pytest.approx(1.0, abs=1e-6)
    assert all(t.name.startswith("integral_") for t in rep.tests_run)


def test_flrw_constant_over_cylinder():
    rep = flrw_obstruction_report(ScaleFactorSpec("1"), CYLINDER)
    assert rep.verdict == "obstructed_extension"
    assert rep.provenance == "flrw_slice_not_cone"
    assert rep.exit_code == 10


def test_flrw_constant_over_plane():
    rep = flrw_obstruction_report(ScaleFactorSpec("1"), PLANE)
    assert rep.verdict == "no_obstruction_found"
    assert rep.exit_code == 0


def test_flrw_needs_infinite_end():
    with pytest.raises(InvalidParameter):
        flrw_obstruction_report(ScaleFactorSpec("1", (0, 1)), PLANE)
