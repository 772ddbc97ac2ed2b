import numpy as np
import pytest

from fractrans.expr import parse
from fractrans.fields import AssumptionError, certify_velocity
from fractrans.geometry import GeometryError, lens_domain, rectangle_domain
from fractrans.harness import (
    decompose_increment,
    estimate_constant,
    fitted_flatness,
    parallel_map,
    random_family,
    sharpness_sweep,
    term_integrals,
    x1_direction_check,
)
from fractrans.norms import FracParams, QuadratureConfig


@pytest.fixture(scope="module")
def lens():
    return lens_domain()


@pytest.fixture(scope="module")
def rect():
    return rectangle_domain()


@pytest.fixture(scope="module")
def u_lens(lens):
    return certify_velocity("1", lens)


def test_decompose_homogeneous_H(lens):
    d = decompose_increment("0", "x2^2", lens, 0.0, 0.3, 0.1)
    assert d.I1 == 0.0 and d.I2 == 0.0
    assert d.I0 == pytest.approx(0.4**2 - 0.3**2)


def test_decompose_x2_independent_H(lens):
    # H depending on x1 only kills the I1 increment term
    d = decompose_increment("x1^2", "0", lens, 0.0, 0.2, 0.05)
    assert d.I1 == pytest.approx(0.0, abs=1e-14)
    assert abs(d.I2) > 0.0


def test_decompose_offset_interval_width(lens):
    d = decompose_increment("1", "0", lens, 0.0, 0.1, 0.05)
    ux = lambda z: -np.sqrt(z * (1 - z))
    assert d.I2 == pytest.approx(ux(0.1) - ux(0.15), rel=1e-12)


def test_decompose_identity_at_random_points(lens, rect):
    rng = np.random.default_rng(0)
    for dom in (lens, rect):
        worst = 0.0
        for _ in range(50):
            x2 = rng.uniform(0.05, 0.85)
            h = rng.uniform(0.01, 0.1)
            lo0, hi0 = dom.cut(x2)
            lo1, hi1 = dom.cut(x2 + h)
            x1 = rng.uniform(max(lo0, lo1), min(hi0, hi1))
            d = decompose_increment("x1 + exp(x2)", "cos(2*x2)", dom, x1, x2, h)
            worst = max(worst, d.identity_gap)
        assert worst < 1e-10


def test_decompose_rejects_outside_points(lens):
    with pytest.raises(GeometryError):
        decompose_increment("1", "0", lens, 0.0, 0.95, 0.1)  # x2+h leaves (a,b)
    with pytest.raises(GeometryError):
        decompose_increment("1", "0", lens, 0.49, 0.1, 0.05)  # x1 outside the cut


def test_term_integrals_trivial_zeros(lens):
    fp = FracParams(0.45, 5)
    quad = QuadratureConfig(N=32, M=32)
    out = term_integrals("1", "0", lens, fp, quad)
    assert out["J0"] == 0.0
    out = term_integrals("0", "x2", lens, fp, quad)
    assert out["J1"] == 0.0 and out["J2"] == 0.0
    assert out["J0"] > 0.0


def test_term_integrals_lens_J2_converges(lens):
    # independent oracle (fine log-uniform h-grid, dense x2 sampling)
    # gives 0.001940 for H == 1, sigma_in == 0, s=0.45, p=5, delta=0.1
    fp = FracParams(0.45, 5)
    coarse = term_integrals("1", "0", lens, fp, QuadratureConfig(N=64, M=64))
    fine = term_integrals("1", "0", lens, fp, QuadratureConfig(N=128, M=128, h_min=5e-7))
    assert coarse["J2"] == pytest.approx(1.940e-3, rel=0.05)
    assert fine["J2"] == pytest.approx(1.940e-3, rel=0.02)
    assert abs(fine["J2"] - coarse["J2"]) / coarse["J2"] < 0.10
    assert coarse["implied_constants"]["J2"] > 0.0


def test_estimate_constant_constant_sample(lens, u_lens):
    # constant data solve to a constant field: the ratio has a closed form
    # |domain|^(1/p) / (|domain|^(1/p) + |inflow curve|^(1/p))
    rep = estimate_constant(lens, u_lens, FracParams(0.45, 5), [("2", "2")], N=32, M=32)
    A = (np.pi / 4) ** 0.2
    B = (np.pi / 2) ** 0.2
    assert rep.ratios[0] == pytest.approx(A / (A + B), rel=0.01)
    assert rep.C_emp < 1.0
    assert rep.theorem_valid


def test_estimate_constant_refuses_out_of_regime(lens, u_lens):
    with pytest.raises(AssumptionError):
        estimate_constant(lens, u_lens, FracParams(0.6, 5), [("1", "0")], N=16, M=16)
    rep = estimate_constant(
        lens, u_lens, FracParams(0.6, 5), [("1", "0")], N=16, M=16, override=True
    )
    assert not rep.theorem_valid


def test_estimate_constant_trend_toward_threshold(lens, u_lens):
    # recorded trend: C_emp grows as s approaches 1/r from below
    family = random_family(77, 5)
    values = [
        estimate_constant(lens, u_lens, FracParams(s, 5), family, N=32, M=32).C_emp
        for s in (0.42, 0.45, 0.48)
    ]
    assert all(b >= a for a, b in zip(values, values[1:]))


def test_sharpness_sweep_lens(lens):
    rep = sharpness_sweep(lens, FracParams(0.45, 5), [0.45, 0.6], [1e-6, 1e-5, 1e-4, 1e-3])
    assert rep.flatness_r == pytest.approx(2.0, abs=0.05)
    assert rep.verdicts == ("convergent", "divergent")
    # fitted divergence exponent vs p * (1/r - s) = -0.5
    assert rep.fitted_slopes[1] == pytest.approx(-0.5, rel=0.15)


def test_sharpness_sweep_quartic(lens):
    quartic = lens_domain(power=4)
    rep = sharpness_sweep(quartic, FracParams(0.22, 10), [0.22, 0.30], [1e-6, 1e-5, 1e-4, 1e-3])
    assert rep.flatness_r == pytest.approx(4.0, abs=0.1)
    assert rep.verdicts == ("convergent", "divergent")
    assert rep.fitted_slopes[1] == pytest.approx(-0.5, rel=0.15)


def test_sharpness_sweep_requires_singularity(rect):
    with pytest.raises(GeometryError):
        sharpness_sweep(rect, FracParams(0.45, 5), [0.5], [1e-4, 1e-3])


def test_x1_direction_check_rectangle(rect):
    u = certify_velocity("1", rect)
    out = x1_direction_check("exp(x1)", "0", u, rect, FracParams(0.8, 3), N=48, M=48)
    assert np.isfinite(out["x1_seminorm"]) and out["x1_seminorm"] > 0.0
    assert out["drift"] < 0.05
    assert not out["homogeneous_H"]


def test_x1_direction_check_lens_above_threshold(lens, u_lens):
    # s = 0.7 > 1/r on the lens: x2-direction would diverge, x1 must not
    out = x1_direction_check("1", "0", u_lens, lens, FracParams(0.7, 4), N=48, M=48)
    assert np.isfinite(out["x1_seminorm"])
    assert out["drift"] < 0.1


def test_x1_direction_check_homogeneous_guard(rect):
    u = certify_velocity("1", rect)
    out = x1_direction_check("0", "1 + x2", u, rect, FracParams(0.5, 4), N=32, M=32)
    assert out["homogeneous_H"]
    assert np.isfinite(out["ratio"])


def test_fitted_flatness(lens):
    r, pt = fitted_flatness(lens)
    assert r == pytest.approx(2.0, abs=0.05)
    assert pt.flat_certified


def test_random_family_is_deterministic_and_parseable():
    fam1 = random_family(1234, 8)
    fam2 = random_family(1234, 8)
    assert fam1 == fam2
    for H_text, sig_text in fam1:
        parse(H_text)
        parse(sig_text)


def test_parallel_map_deterministic(monkeypatch):
    items = list(range(20))
    seq = parallel_map(lambda x: x * x, items)
    monkeypatch.setenv("FRACTRANS_WORKERS", "4")
    par = parallel_map(lambda x: x * x, items)
    assert seq == par
