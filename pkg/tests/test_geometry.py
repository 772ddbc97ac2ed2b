import numpy as np
import pytest

from fractrans.expr import parse
from fractrans.fields import certify_velocity
from fractrans.geometry import (
    GeometryError,
    build_domain,
    classify_boundary,
    detect_singularities,
    estimate_flatness,
    lens_domain,
    rectangle_domain,
    slice_interval,
    verify_analytic_lower_bound,
    vertical_cuts,
)


@pytest.fixture(scope="module")
def lens():
    return lens_domain()


@pytest.fixture(scope="module")
def quartic():
    return lens_domain(power=4)


@pytest.fixture(scope="module")
def rect():
    return rectangle_domain()


def test_build_domain_rejects_swapped_curves():
    with pytest.raises(GeometryError):
        build_domain(0.0, 1.0, "1", "0")
    with pytest.raises(GeometryError):
        build_domain(1.0, 0.0, "0", "1")


def test_lens_derived_extremes(lens):
    assert lens.ux_star == pytest.approx(-0.5, abs=1e-6)
    assert lens.ox_star == pytest.approx(0.5, abs=1e-6)
    c1, c2, d1, d2 = lens.corner_limits
    assert c1 == pytest.approx(0.0, abs=1e-12)
    assert d1 == pytest.approx(0.0, abs=1e-12)
    assert lens.gamma0_segments == ()


def test_rectangle_gamma0_segments(rect):
    # top and bottom walls are genuine horizontal segments
    assert len(rect.gamma0_segments) == 2
    (lo0, hi0, z0), (lo1, hi1, z1) = rect.gamma0_segments
    assert (lo0, hi0, z0) == pytest.approx((0.0, 1.0, 0.0))
    assert (lo1, hi1, z1) == pytest.approx((0.0, 1.0, 1.0))


def test_classify_boundary_lens(lens):
    u = certify_velocity("1", lens)
    report = classify_boundary(lens, u, nsamples=400)
    assert report.inflow_verified and report.outflow_verified
    assert report.violations == ()
    assert report.d_range_inflow[1] < 0.0
    assert report.d_range_outflow[0] > 0.0
    locs = sorted(set((round(x, 9), round(z, 9)) for x, z in report.gamma_s))
    assert locs == [(0.0, 0.0), (0.0, 1.0)]


def test_classify_boundary_quartic_lens(quartic):
    u = certify_velocity("1 + x1^2", quartic)
    report = classify_boundary(quartic, u, nsamples=200)
    assert report.violations == ()
    assert report.inflow_verified and report.outflow_verified


def test_classify_boundary_rectangle(rect):
    u = certify_velocity("1", rect)
    report = classify_boundary(rect, u, nsamples=100)
    assert report.violations == ()
    # vertical walls: d = -u on inflow, +u on outflow
    assert report.d_range_inflow == pytest.approx((-1.0, -1.0))
    assert report.d_range_outflow == pytest.approx((1.0, 1.0))
    assert report.gamma_s == ()


def test_detect_singularities_lens(lens):
    pts = detect_singularities(lens)
    assert len(pts) == 4  # two per curve
    for side in ("inflow", "outflow"):
        params = sorted(p.param for p in pts if p.side == side)
        assert params == pytest.approx([0.0, 1.0])
    for p in pts:
        assert p.location == pytest.approx((0.0, p.param), abs=1e-9)


def test_detect_singularities_rectangle(rect):
    assert detect_singularities(rect) == []


def test_detect_interior_tangency():
    # cusp with vertical tangent at x2 = 1/2 inside the inflow curve
    dom = build_domain(0.0, 1.0, "-2 + abs(x2 - 1/2)^(1/3)", "2")
    pts = detect_singularities(dom)
    inflow_params = [p.param for p in pts if p.side == "inflow"]
    assert any(abs(t - 0.5) < 1e-6 for t in inflow_params)


def test_flatness_lens_is_quadratic(lens):
    pts = [p for p in detect_singularities(lens) if p.side == "inflow"]
    for p in pts:
        fitted = estimate_flatness(lens.inflow, p, window=1e-2)
        assert fitted.flatness_r == pytest.approx(2.0, abs=0.05)
        assert fitted.fit_quality < 0.1
        assert fitted.flat_certified


def test_flatness_quartic_lens(quartic):
    pts = [p for p in detect_singularities(quartic) if p.side == "outflow"]
    for p in pts:
        fitted = estimate_flatness(quartic.outflow, p, window=1e-2)
        assert fitted.flatness_r == pytest.approx(4.0, abs=0.1)
        assert fitted.flat_certified


def test_flatness_cubic_power_recovery():
    dom = build_domain(0.0, 1.0, "-(x2*(1-x2))^(1/3)", "(x2*(1-x2))^(1/3)")
    p = [q for q in detect_singularities(dom) if q.side == "inflow" and q.param == 0.0][0]
    fitted = estimate_flatness(dom.inflow, p, window=1e-2)
    assert fitted.flatness_r == pytest.approx(3.0, rel=0.05)


def test_flatness_requires_vertical_tangent(rect):
    from fractrans.geometry import SingularityPoint

    fake = SingularityPoint(location=(0.0, 0.0), side="inflow", param=0.0)
    with pytest.raises(GeometryError):
        estimate_flatness(rect.inflow, fake, window=1e-2)


def test_analytic_lower_bound_monomial():
    out = verify_analytic_lower_bound(parse("x1^2"), window=0.05)
    assert out["k"] == 2
    assert out["holds"]
    assert out["C"] == pytest.approx(1.0, abs=0.01)


def test_analytic_lower_bound_with_remainder():
    out = verify_analytic_lower_bound(parse("x1^2 - x1^3"), window=0.1)
    assert out["k"] == 2
    assert out["holds"]
    assert out["C"] >= 0.9 - 1e-9


def test_analytic_lower_bound_overrides_requested_order():
    out = verify_analytic_lower_bound(parse("x1^3"), k=2, window=0.1)
    assert out["k"] == 3
    assert out["holds"]


def test_analytic_lower_bound_rejects_flat_function():
    with pytest.raises(GeometryError):
        verify_analytic_lower_bound(parse("0*x1"), window=0.1)


def test_slice_interval(lens, rect):
    lo, hi = slice_interval(lens, 0.5)
    assert (lo, hi) == pytest.approx((-0.5, 0.5))
    assert slice_interval(rect, 0.3) == pytest.approx((0.0, 1.0))
    with pytest.raises(GeometryError):
        slice_interval(lens, 0.0)
    with pytest.raises(GeometryError):
        slice_interval(lens, 1.5)


def test_slice_widths_continuous_under_refinement(lens):
    jumps = []
    for n in (64, 128, 256, 512):
        x2 = np.linspace(0.01, 0.99, n)
        lo, hi = lens.cuts(x2)
        widths = hi - lo
        jumps.append(np.max(np.abs(np.diff(widths))))
    ratios = [a / b for a, b in zip(jumps, jumps[1:])]
    assert all(r > 1.5 for r in ratios)  # max jump -> 0 under refinement


def test_vertical_cuts_lens(lens):
    lo, hi, ok = vertical_cuts(lens, [0.3])
    assert ok[0]
    # chord of the radius-1/2 circle centered at (0, 1/2)
    half = np.sqrt(0.25 - 0.3**2)
    assert lo[0] == pytest.approx(0.5 - half, abs=1e-9)
    assert hi[0] == pytest.approx(0.5 + half, abs=1e-9)


def test_vertical_cuts_rectangle_and_empty(rect, lens):
    lo, hi, ok = vertical_cuts(rect, [0.5])
    assert ok[0] and lo[0] == 0.0 and hi[0] == 1.0
    _, _, ok = vertical_cuts(lens, [0.75])
    assert not ok[0]
