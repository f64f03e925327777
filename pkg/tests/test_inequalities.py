import numpy as np
import pytest

from geomlab.context import SurfaceContext
from geomlab.errors import InvalidArgument
from geomlab.inequalities import (
    InequalityReport,
    acr,
    alias_malacarne,
    allowance,
    bleecker_weiner,
    corollary_ST,
    reilly_general,
    reilly_h,
    reilly_hr,
    suite_entries,
    verify_suite,
)
from geomlab.surface import gen_icosphere, perturbed_sphere


def test_allowance_halves_per_level():
    assert allowance(4) == pytest.approx(0.02)
    assert allowance(5) == pytest.approx(0.01)
    assert allowance(None) == pytest.approx(0.02)


def test_report_ratio_and_certification():
    r = InequalityReport("x", 1.0, 2.0, {"h": True}, tol=0.0)
    assert r.ratio == 0.5 and r.slack == 1.0 and r.certified
    assert not InequalityReport("x", 2.0, 1.0, {}, tol=0.5).certified
    assert not InequalityReport("x", 0.5, 1.0, {"h": False}).certified
    zero = InequalityReport("x", 0.0, 0.0, {}, tol=0.0)
    assert np.isnan(zero.ratio) and zero.certified
    assert not InequalityReport("x", float("nan"), 1.0, {}).certified


def test_reilly_h_sphere_equality(ctx4):
    r = reilly_h(ctx4)
    assert 0.98 <= r.ratio <= 1 + r.tol
    assert r.certified


def test_reilly_h_gap_shrinks():
    gaps = [abs(1 - reilly_h(gen_icosphere(L)).ratio) for L in (3, 4, 5)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 1e-5


def test_sphere_is_equality_case_for_every_bound(ctx4):
    reps = [bleecker_weiner(ctx4), reilly_h(ctx4), reilly_general(ctx4, "id", "id"), reilly_general(ctx4, "t1", "t1")]
    reps += [reilly_hr(ctx4, r) for r in (0, 1)] + [acr(ctx4, r) for r in (0, 1)]
    reps += [alias_malacarne(ctx4, r, s) for r in (0, 1) for s in (0, 1)] + [corollary_ST(ctx4, "t1")]
    for r in reps:
        assert abs(1 - r.ratio) < 1e-3, r.name
        assert r.certified, r.name


def test_ellipsoid_strict(ellipsoid_ctx):
    for r in (reilly_h(ellipsoid_ctx), bleecker_weiner(ellipsoid_ctx), acr(ellipsoid_ctx, 1), reilly_general(ellipsoid_ctx, "t1", "id")):
        assert r.ratio < 0.99, r.name
        assert r.certified


def test_scale_invariance(ellipsoid4):
    a = reilly_h(ellipsoid4).ratio
    b = reilly_h(ellipsoid4.scaled(2.7)).ratio
    assert b == pytest.approx(a, rel=1e-8)


def test_order_validation(ctx3):
    with pytest.raises(InvalidArgument):
        reilly_hr(ctx3, 2)
    with pytest.raises(InvalidArgument):
        alias_malacarne(ctx3, 0, -1)


def test_suite_entries_count():
    names = [n for n, _ in suite_entries(2, ("id", "t1"))]
    assert len(names) == len(set(names))
    # 2 + n + n + n^2 + |T| + |T|^2
    assert len(names) == 2 + 2 + 2 + 4 + 2 + 4


@pytest.mark.parametrize("fixture", ["ctx4", "ellipsoid_ctx", "bumpy_ctx"])
def test_suite_certified_on_corpus(fixture, request):
    rep = verify_suite(request.getfixturevalue(fixture))
    assert rep.all_certified
    assert rep.mesh["lambda1_residual"] < 1e-6
    d = rep.to_dict()
    assert all("certified" in e and "asserted" in e for e in d["entries"])


def test_non_convex_member_records_hypothesis():
    m = perturbed_sphere(0.1, 4, 0, 3)
    rep = verify_suite(SurfaceContext(m))
    flagged = [e for e in rep.entries if e.get("notes") == "hypothesis"]
    assert flagged, "t=0.1 seed 0 should leave the convex regime"
    assert all(not e["asserted"] for e in flagged)
    assert rep.all_certified


def test_threaded_suite_matches_serial(sphere3):
    a = verify_suite(SurfaceContext(sphere3)).to_dict()
    b = verify_suite(SurfaceContext(sphere3), threads=3).to_dict()
    assert a == b


def test_custom_entry(ctx3):
    rep = verify_suite(ctx3, custom={"lap": "id"})
    assert any(e["name"] == "lap" and e["certified"] for e in rep.entries)
