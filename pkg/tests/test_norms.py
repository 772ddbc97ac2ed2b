import numpy as np
import pytest

from fractrans.fields import ScalarField, grid_nodes
from fractrans.geometry import lens_domain, rectangle_domain
from fractrans.norms import (
    FracParams,
    QuadratureConfig,
    boundary_norm,
    full_seminorm,
    imbedding_check,
    lp_norm,
    norm_full,
    norm_star,
    seminorm_x1,
    seminorm_x2,
    sup_norm,
)


@pytest.fixture(scope="module")
def rect():
    return rectangle_domain()


@pytest.fixture(scope="module")
def lens():
    return lens_domain()


QUAD = QuadratureConfig(N=64, M=64)
QUAD128 = QuadratureConfig(N=128, M=128)


def test_frac_params_validation_and_flags():
    with pytest.raises(ValueError):
        FracParams(0.0, 4)
    with pytest.raises(ValueError):
        FracParams(1.0, 4)
    with pytest.raises(ValueError):
        FracParams(0.5, 0.5)
    fp = FracParams(0.45, 5)
    assert fp.sp_gt_2
    assert fp.s_lt_recip_r(2.0)
    assert fp.theorem_valid(2.0)
    assert not FracParams(0.6, 5).theorem_valid(2.0)  # s > 1/r
    assert not FracParams(0.3, 5).theorem_valid(2.0)  # sp < 2
    assert FracParams(0.8, 3).theorem_valid(None)  # no tangency constraint


def test_quadrature_config_validation_and_refinement():
    with pytest.raises(ValueError):
        QuadratureConfig(N=0)
    with pytest.raises(ValueError):
        QuadratureConfig(h_min=0.0)
    with pytest.raises(ValueError):
        QuadratureConfig(q=1.0)
    fine = QUAD.refined()
    assert (fine.N, fine.M, fine.h_min) == (128, 128, QUAD.h_min / 2)


def test_lp_norm_fixtures(rect, lens):
    one = ScalarField.from_expression("1")
    x1 = ScalarField.from_expression("x1")
    assert lp_norm(one, rect, 2, QUAD) == pytest.approx(1.0, rel=1e-12)
    assert lp_norm(x1, rect, 2, QUAD128) == pytest.approx((1 / 3) ** 0.5, rel=1e-3)
    assert lp_norm(x1, rect, 4, QUAD128) == pytest.approx((1 / 5) ** 0.25, rel=1e-3)
    # the lens is the disk of radius 1/2: area pi/4
    assert lp_norm(one, lens, 2, QuadratureConfig(N=256, M=16)) == pytest.approx(
        (np.pi / 4) ** 0.5, rel=1e-3
    )


@pytest.mark.parametrize("s,p", [(0.5, 4), (0.3, 5)])
def test_seminorm_x1_closed_form(rect, s, p):
    # for f = x1 the kernel integral has the closed form
    # 2 / ( p(1-s) * (p(1-s)+1) )
    f = ScalarField.from_expression("x1")
    val = seminorm_x1(f, rect, FracParams(s, p), QUAD128)
    exact = 2.0 / ((p * (1 - s)) * (p * (1 - s) + 1))
    assert val**p == pytest.approx(exact, rel=0.01)


def test_seminorms_annihilate_constants_and_transverse_directions(rect):
    fp = FracParams(0.5, 4)
    c = ScalarField.from_expression("3")
    assert seminorm_x1(c, rect, fp, QUAD) == 0.0
    assert seminorm_x2(c, rect, fp, QUAD) == 0.0
    assert full_seminorm(c, rect, fp, QuadratureConfig(N=24, M=24)) == 0.0
    assert seminorm_x1(ScalarField.from_expression("x2"), rect, fp, QUAD) == 0.0
    assert seminorm_x2(ScalarField.from_expression("x1"), rect, fp, QUAD) == 0.0


def test_seminorm_coordinate_swap_symmetry(rect):
    fp = FracParams(0.5, 4)
    f = ScalarField.from_expression("x1 + x2^2")
    g = ScalarField.from_expression("x2 + x1^2")  # same function with axes swapped
    v1 = seminorm_x1(f, rect, fp, QUAD)
    v2 = seminorm_x2(g, rect, fp, QUAD)
    assert v1 == pytest.approx(v2, rel=0.01)


def test_norm_star_assembly(rect):
    fp = FracParams(0.5, 4)
    report = norm_star("x1", rect, fp, QUAD128, refine=False)
    assert report.lp_part == pytest.approx((1 / 5) ** 0.25, rel=1e-3)
    assert report.seminorm_x1 == pytest.approx((1 / 3) ** 0.25, rel=0.01)
    assert report.seminorm_x2 == 0.0
    assert report.norm_star == pytest.approx((1 / 5) ** 0.25 + (1 / 3) ** 0.25, rel=0.01)
    assert report.norm_star >= report.lp_part


def test_constant_norms_equal_one_on_unit_square(rect):
    fp = FracParams(0.6, 4)
    star = norm_star("1", rect, fp, QUAD, refine=False)
    full = norm_full("1", rect, fp, QuadratureConfig(N=24, M=24), refine=False)
    assert star.norm_star == pytest.approx(1.0, rel=1e-12)
    assert full.norm_full == pytest.approx(1.0, rel=1e-12)


def test_homogeneity(rect):
    fp = FracParams(0.5, 4)
    quad = QuadratureConfig(N=16, M=16)
    base = "x1^2 + sin(x2)"
    n0 = norm_star(base, rect, fp, quad, refine=False).norm_star
    for lam in (-2.0, 0.5, 3.0):
        scaled = f"({lam})*({base})"
        n1 = norm_star(scaled, rect, fp, quad, refine=False).norm_star
        assert n1 == pytest.approx(abs(lam) * n0, rel=1e-12)


def test_triangle_inequality(rect):
    fp = FracParams(0.5, 4)
    quad = QuadratureConfig(N=16, M=16)
    rng = np.random.default_rng(123)
    for _ in range(20):
        c = rng.uniform(-2, 2, size=6).round(3)
        f = f"{c[0]} + {c[1]}*x1 + {c[2]}*x2^2"
        g = f"{c[3]}*x1*x2 + {c[4]}*sin(x1) + {c[5]}"
        nf = norm_star(f, rect, fp, quad, refine=False).norm_star
        ng = norm_star(g, rect, fp, quad, refine=False).norm_star
        nfg = norm_star(f"({f}) + ({g})", rect, fp, quad, refine=False).norm_star
        assert nfg <= nf + ng + 1e-9 * (1 + nf + ng)


def test_full_seminorm_matches_self_refinement(rect):
    fp = FracParams(0.3, 4)
    coarse = full_seminorm("x1", rect, fp, QuadratureConfig(N=24, M=24))
    fine = full_seminorm("x1", rect, fp, QuadratureConfig(N=48, M=48))
    assert coarse == pytest.approx(fine, rel=0.02)


def test_full_vs_star_ratio_in_band(lens):
    fp = FracParams(0.45, 5)
    quad = QuadratureConfig(N=24, M=24)
    for text in ("1 + x1", "exp(x1)", "sin(3*x2)"):
        full = norm_full(text, lens, fp, quad, refine=False).norm_full
        star = norm_star(text, lens, fp, quad, refine=False).norm_star
        assert 0.2 <= full / star <= 5.0


def test_jump_field_diagnostics_grow(rect):
    # a jump along a vertical line is not in the space once sp >= 1:
    # refining the grid and the cutoff together must blow the seminorm up
    fp = FracParams(0.9, 2)
    values = []
    for n, h in ((32, 1e-3), (64, 1e-4), (128, 1e-5)):
        _, x1_nodes = grid_nodes(rect, n, n)
        jump = (x1_nodes > 0.5).astype(float)
        f = ScalarField.from_grid(rect, jump)
        quad = QuadratureConfig(N=n, M=n, h_min=h)
        values.append(seminorm_x1(f, rect, fp, quad))
    assert values[1] > 1.2 * values[0]
    assert values[2] > 1.2 * values[1]


def test_boundary_norm_lens_arclength(lens):
    # inflow curve is a half circle of radius 1/2: length pi/2
    for p in (2, 4):
        val = boundary_norm("1", lens.inflow, FracParams(0.5, p), QUAD, measure="arc")
        assert val == pytest.approx((np.pi / 2) ** (1 / p), rel=1e-3)


def test_boundary_norm_rectangle_fixture(rect):
    fp = FracParams(0.5, 4)
    val = boundary_norm("1", rect.inflow, fp, QUAD, measure="arc")
    assert val == pytest.approx(1.0, rel=1e-9)
    # g = x2: Lp part (1/5)^(1/4), seminorm part (1/3)^(1/4)
    exact = (1 / 5) ** 0.25 + (1 / 3) ** 0.25
    for measure in ("arc", "param"):
        got = boundary_norm("x2", rect.inflow, fp, QuadratureConfig(N=64, M=128), measure=measure)
        assert got == pytest.approx(exact, rel=0.01)


def test_boundary_norm_arc_vs_param_differ_on_curved_boundary(lens):
    fp = FracParams(0.5, 4)
    arc = boundary_norm("x2", lens.inflow, fp, QUAD, measure="arc")
    par = boundary_norm("x2", lens.inflow, fp, QUAD, measure="param")
    assert arc != pytest.approx(par, rel=1e-3)  # the measures genuinely differ


def test_sup_norm_and_imbedding(rect):
    fp = FracParams(0.6, 4)  # sp = 2.4 > 2
    out = imbedding_check(ScalarField.from_expression("1"), rect, fp, QUAD)
    assert out["ratio"] == pytest.approx(1.0, rel=1e-12)
    out = imbedding_check(ScalarField.from_expression("x1"), rect, fp, QUAD)
    assert out["ratio"] <= 1.0
    assert out["sup"] == pytest.approx(1.0, rel=1e-2)
    with pytest.warns(RuntimeWarning):
        imbedding_check(
            ScalarField.from_expression("x1"), rect, FracParams(0.3, 4), QuadratureConfig(N=8, M=8)
        )


def test_norm_star_refinement_diagnostics(rect):
    fp = FracParams(0.5, 4)
    report = norm_star("x1*x2", rect, fp, QuadratureConfig(N=16, M=16), refine=True)
    d = report.refinement_diagnostics
    assert d is not None
    assert d["drift_norm_star"] < 0.05  # smooth field: refinement-stable


def test_sup_norm_grid_backed(rect):
    _, x1_nodes = grid_nodes(rect, 8, 8)
    f = ScalarField.from_grid(rect, 2.0 * x1_nodes - 1.0)
    assert sup_norm(f) == pytest.approx(1.0)
