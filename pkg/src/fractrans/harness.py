"""Estimate machinery: increment decomposition, empirical constants, sharpness.

For the reduced problem  sigma_x1 = H,  sigma = sigma_in at the inflow
curve, the x2-increment of the solution splits into three terms,

    I0 = inflow-data difference,
    I1 = integral of the H-increment over the common part of the cuts,
    I2 = integral of H over the boundary-offset interval,

and only I2 feels the boundary geometry: near a tangency point the
offset interval has width ~ |h|^(1/r) with r the boundary flatness, so
the fractional h-integral of |I2|^p converges exactly when s < 1/r.
The sweep isolates that kernel; the estimate runner measures the ratio

    ||sigma||* / ( ||H||* + ||sigma_in||_(inflow) )

over sample families and across mesh refinement.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .expr import Expr, evaluate, parse
from .fields import AssumptionError, ScalarField
from .geometry import GeometryError, detect_singularities, estimate_flatness
from .norms import (
    FracParams,
    QuadratureConfig,
    _increment_levels,
    _midpoints,
    boundary_norm,
    norm_star,
    seminorm_x1,
    seminorm_x2,
)
from .solver import solve

__all__ = [
    "IDecomposition",
    "EstimateReport",
    "SweepReport",
    "decompose_increment",
    "term_integrals",
    "estimate_constant",
    "sharpness_sweep",
    "x1_direction_check",
    "random_family",
    "fitted_flatness",
    "parallel_map",
]

WORKERS_ENV = "FRACTRANS_WORKERS"

# |log-log slope| below which the h-integral counts as converged
CONVERGENCE_SLOPE_THRESHOLD = 0.1


def parallel_map(fn, items):
    """Map preserving order; honors the worker-count environment cap."""
    workers = int(os.environ.get(WORKERS_ENV, "1"))
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _as_expr(e):
    return e if isinstance(e, Expr) else parse(e)


def _integral(fn, lo, hi, n=512):
    """Signed trapezoid integral of fn over [lo, hi] (hi < lo allowed)."""
    ts = np.linspace(lo, hi, n + 1)
    vals = np.asarray(fn(ts), dtype=float)
    vals = np.broadcast_to(vals, ts.shape)
    return float(np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(ts)))


def _h_mesh_for_slice(h_min, delta, cap, q, panels):
    """Graded h-mesh on [h_min, min(delta, cap)].

    Graded toward h_min for the fractional kernel; when the admissible
    range is capped by the domain top (cap < delta) the boundary offset
    has a root-type kink at the cap, so the upper part is graded toward
    the cap as well.
    """
    top = min(delta, cap)
    if top <= h_min:
        return np.empty(0), np.empty(0)
    if cap >= delta:
        return _increment_levels(delta, h_min, q, panels)
    split = max(h_min, 0.25 * top)
    mids, lens = _increment_levels(split, h_min, q, panels)
    # distances-to-cap graded geometrically down to a negligible sliver
    d_hi = top - split
    d_edges = [d_hi]
    while d_edges[-1] > 1e-9 * top:
        d_edges.append(d_edges[-1] * q)
    mids2, lens2 = [], []
    for d0, d1 in zip(d_edges[:-1], d_edges[1:]):
        sub = np.linspace(top - d0, top - d1, panels + 1)
        mids2.append(0.5 * (sub[:-1] + sub[1:]))
        lens2.append(np.diff(sub))
    mids2.append(np.array([top - 0.5 * d_edges[-1]]))
    lens2.append(np.array([d_edges[-1]]))
    return (
        np.concatenate([mids, np.concatenate(mids2)]),
        np.concatenate([lens, np.concatenate(lens2)]),
    )


@dataclass(frozen=True)
class IDecomposition:
    I0: float
    I1: float
    I2: float
    sigma_tilde_diff: float
    identity_gap: float


def decompose_increment(H, sigma_in, dom, x1, x2, h, npanels=2048):
    """Split sigma(x1, x2+h) - sigma(x1, x2) of the reduced problem.

    The offset-interval term I2 is a signed integral; when the inflow
    curve moves the other way (ux(x2+h) > ux(x2)) the orientation simply
    reverses, which is the interchange convention of the estimate.  The
    identity I0 + I1 + I2 = sigma(x1, x2+h) - sigma(x1, x2) is checked by
    independent quadrature and its gap reported.
    """
    H = H if isinstance(H, ScalarField) else ScalarField.from_expression(H)
    sigma_in = _as_expr(sigma_in)
    if not (dom.a < x2 < dom.b and dom.a < x2 + h < dom.b):
        raise GeometryError("x2 and x2+h must both lie inside (a, b)")
    lo0, hi0 = dom.cut(x2)
    lo1, hi1 = dom.cut(x2 + h)
    if not (lo0 <= x1 <= hi0 and lo1 <= x1 <= hi1):
        raise GeometryError(f"x1={x1:.6g} is outside one of the two cuts")

    def sig_in_at(z):
        return float(evaluate(sigma_in, dom.inflow.x1(z), z))

    I0 = sig_in_at(x2 + h) - sig_in_at(x2)
    I1 = _integral(lambda t: H.eval(t, x2 + h) - H.eval(t, x2), lo0, x1, npanels)
    I2 = _integral(lambda t: H.eval(t, x2 + h), lo1, lo0, npanels)

    def sigma_tilde(z):
        lo, _ = dom.cut(z)
        return sig_in_at(z) + _integral(lambda t: H.eval(t, z), lo, x1, npanels)

    diff = sigma_tilde(x2 + h) - sigma_tilde(x2)
    return IDecomposition(
        I0=I0,
        I1=I1,
        I2=I2,
        sigma_tilde_diff=diff,
        identity_gap=abs((I0 + I1 + I2) - diff),
    )


def term_integrals(H, sigma_in, dom, fp, quad):
    """Fractional h-integrals J0, J1, J2 of the three increment terms.

    Each Jk integrates |Ik|^p / h^(1+sp) over x1, x2 and h in
    (h_min, delta) on the graded mesh.  The report pairs every Jk with
    the norm it is dominated by in the estimate (J0 by the inflow-data
    norm, J1 by the x2-seminorm of H, J2 by the full norm of H) and the
    implied constant Jk / bound.
    """
    H_f = H if isinstance(H, ScalarField) else ScalarField.from_expression(H)
    sigma_in = _as_expr(sigma_in)
    delta = quad.h_max if quad.h_max is not None else 0.1 * (dom.b - dom.a)
    if quad.h_min >= delta:
        raise ValueError("empty h-mesh: h_min must be below delta")

    x2 = _midpoints(dom.a, dom.b, quad.N)
    dz = (dom.b - dom.a) / quad.N
    lo, hi = dom.cuts(x2)
    J0 = J1 = J2 = 0.0
    for j in range(quad.N):
        z = float(x2[j])
        hs, ls = _h_mesh_for_slice(
            quad.h_min, delta, dom.b - z, quad.q, quad.panels_per_level
        )
        if hs.size == 0:
            continue
        ks = ls * hs ** (-(1.0 + fp.sp))
        width = hi[j] - lo[j]
        if width <= 0.0:
            continue

        sig_here = float(evaluate(sigma_in, lo[j], z))
        lo_off = np.asarray(dom.inflow.x1(z + hs), dtype=float)
        sig_there = np.asarray(
            evaluate(sigma_in, lo_off, z + hs), dtype=float
        )
        I0 = np.broadcast_to(sig_there, hs.shape) - sig_here
        J0 += dz * width * np.sum(ks * np.abs(I0) ** fp.p)

        # I2: integral of H over the boundary-offset interval, 16 panels
        tau = (np.arange(16) + 0.5) / 16.0
        seg = lo_off[:, None] + (lo[j] - lo_off)[:, None] * tau[None, :]
        Hseg = np.asarray(H_f.eval(seg, (z + hs)[:, None]), dtype=float)
        I2 = (lo[j] - lo_off) * np.mean(np.broadcast_to(Hseg, seg.shape), axis=1)
        J2 += dz * width * np.sum(ks * np.abs(I2) ** fp.p)

        # I1 as a function of x1 by cumulative quadrature along the cut
        tgrid = np.linspace(lo[j], hi[j], quad.M)
        H_here = np.broadcast_to(np.asarray(H_f.eval(tgrid, z)), tgrid.shape)
        H_there = np.broadcast_to(
            np.asarray(H_f.eval(tgrid[None, :], (z + hs)[:, None])), (hs.size, quad.M)
        )
        dH = H_there - H_here[None, :]
        dt = np.diff(tgrid)
        I1 = np.concatenate(
            [np.zeros((hs.size, 1)), np.cumsum(0.5 * (dH[:, 1:] + dH[:, :-1]) * dt, axis=1)],
            axis=1,
        )
        inner = np.sum(0.5 * (np.abs(I1[:, 1:]) ** fp.p + np.abs(I1[:, :-1]) ** fp.p) * dt, axis=1)
        J1 += dz * np.sum(ks * inner)

    bound0 = boundary_norm(sigma_in, dom.inflow, fp, quad, measure="param") ** fp.p
    bound1 = seminorm_x2(H_f, dom, fp, quad) ** fp.p
    bound2 = norm_star(H_f, dom, fp, quad, refine=False).norm_star ** fp.p

    def implied(j, bound):
        return j / bound if bound > 0 else None

    return {
        "J0": J0,
        "J1": J1,
        "J2": J2,
        "bound0_inflow_norm_p": bound0,
        "bound1_x2_seminorm_p": bound1,
        "bound2_norm_star_p": bound2,
        "implied_constants": {
            "J0": implied(J0, bound0),
            "J1": implied(J1, bound1),
            "J2": implied(J2, bound2),
        },
        "delta": delta,
        "h_min": quad.h_min,
    }


@dataclass(frozen=True)
class EstimateReport:
    ratios: tuple[float, ...]
    C_emp: float
    C_emp_refined: float
    stability: float  # relative drift of C_emp across one refinement
    s: float
    p: float
    flatness_r: float | None
    theorem_valid: bool

    def to_dict(self):
        return {
            "ratios": list(self.ratios),
            "C_emp": self.C_emp,
            "C_emp_refined": self.C_emp_refined,
            "stability": self.stability,
            "s": self.s,
            "p": self.p,
            "flatness_r": self.flatness_r,
            "theorem_valid": self.theorem_valid,
        }


def fitted_flatness(dom, window=1e-2):
    """Largest fitted flatness exponent over the domain's tangency points."""
    points = detect_singularities(dom)
    best = None
    best_pt = None
    for pt in points:
        curve = dom.inflow if pt.side == "inflow" else dom.outflow
        fitted = estimate_flatness(curve, pt, window=window)
        if best is None or fitted.flatness_r > best:
            best = fitted.flatness_r
            best_pt = fitted
    return best, best_pt


def estimate_constant(dom, u, fp, family, N=64, M=64, quad=None, r="auto", override=False):
    """Empirical constant of the a priori bound over a sample family.

    Solves every (H, sigma_in) sample, forms the ratio of the solution
    norm to the data norms, and reports the max ratio at the given mesh
    and at one refinement.  Outside the regime 1/r > s > 2/p the run is
    refused unless ``override`` requests the out-of-regime experiment.
    """
    quad = quad or QuadratureConfig(N=N, M=M)
    if r == "auto":
        r = fitted_flatness(dom)[0] if detect_singularities(dom) else None
    if not fp.theorem_valid(r) and not override:
        raise AssumptionError(
            f"(s, p) = ({fp.s}, {fp.p}) violates the regime 1/r > s > 2/p for "
            f"r = {r}; pass override=True for a deliberate out-of-regime run"
        )
    if not family:
        raise ValueError("empty sample family")

    def ratio_at(sample, n, m, q):
        H_text, sig_text = sample
        res = solve(H_text, sig_text, u, dom, N=n, M=m)
        num = norm_star(res.sigma, dom, fp, q, refine=False).norm_star
        den_H = norm_star(H_text, dom, fp, q, refine=False).norm_star
        den_b = boundary_norm(sig_text, dom.inflow, fp, q, measure="arc")
        den = den_H + den_b
        if den <= 0.0:
            raise ValueError(f"degenerate sample (zero data norm): {sample}")
        return num / den

    coarse = parallel_map(lambda s: ratio_at(s, N, M, quad), family)
    fine = parallel_map(lambda s: ratio_at(s, 2 * N, 2 * M, quad.refined()), family)
    C0, C1 = max(coarse), max(fine)
    return EstimateReport(
        ratios=tuple(coarse),
        C_emp=C0,
        C_emp_refined=C1,
        stability=abs(C1 - C0) / C0,
        s=fp.s,
        p=fp.p,
        flatness_r=r,
        theorem_valid=fp.theorem_valid(r),
    )


@dataclass(frozen=True)
class SweepReport:
    s_values: tuple[float, ...]
    h_min_values: tuple[float, ...]
    K: tuple[tuple[float, ...], ...]  # [s][h_min]
    fitted_slopes: tuple[float, ...]
    predicted_exponents: tuple[float, ...]  # p * (epsilon - s)
    verdicts: tuple[str, ...]
    epsilon: float
    flatness_r: float
    p: float

    def to_dict(self):
        return {
            "s_values": list(self.s_values),
            "h_min_values": list(self.h_min_values),
            "K": [list(row) for row in self.K],
            "fitted_slopes": list(self.fitted_slopes),
            "predicted_exponents": list(self.predicted_exponents),
            "verdicts": list(self.verdicts),
            "epsilon": self.epsilon,
            "flatness_r": self.flatness_r,
            "p": self.p,
        }


def sharpness_sweep(dom, fp_base, s_grid, h_min_grid, quad=None, window=1e-2):
    """Convergence/divergence of the offset-interval kernel across s = 1/r.

    For each s the kernel integral

        K(h_min) = int_(h_min)^delta |ux(x2) - ux(x2 + h)|^p / h^(1+sp) dh

    is evaluated at the singular parameter value and a geometric sequence
    of slices approaching it (their supremum), and log K is fitted
    against log h_min.  A near-zero slope means the integral has
    converged (s < 1/r); otherwise the slope estimates the divergence
    exponent, to be compared with p * (1/r - s).
    """
    quad = quad or QuadratureConfig()
    points = detect_singularities(dom)
    if not points:
        raise GeometryError("domain has no tangency point; the sweep needs one")
    r, pt = fitted_flatness(dom, window=window)
    eps = 1.0 / r
    curve = dom.inflow if pt.side == "inflow" else dom.outflow
    t_star = pt.param
    direction = 1.0 if t_star <= dom.a + 1e-12 else -1.0
    span = dom.b - dom.a
    reps = [t_star] + [t_star + direction * span * 1e-7 * 0.1**k for k in range(3)]
    delta = quad.h_max if quad.h_max is not None else 0.1 * span

    def kernel_integral(s, h_min):
        fp = FracParams(s=s, p=fp_base.p)
        h_mid, h_len = _increment_levels(delta, h_min, quad.q, max(2, quad.panels_per_level))
        best = 0.0
        for t0 in reps:
            x1_t0 = float(curve.x1(t0))
            ys = np.asarray(curve.x1(t0 + direction * h_mid), dtype=float)
            w = np.abs(x1_t0 - ys)
            val = float(np.sum(h_len * w**fp.p * h_mid ** (-(1.0 + fp.sp))))
            best = max(best, val)
        return best

    h_grid = tuple(sorted(float(h) for h in h_min_grid))
    K_rows = []
    slopes = []
    verdicts = []
    predicted = []
    for s in s_grid:
        Ks = [kernel_integral(float(s), h) for h in h_grid]
        K_rows.append(tuple(Ks))
        slope = float(np.polyfit(np.log(h_grid), np.log(Ks), 1)[0])
        slopes.append(slope)
        predicted.append(fp_base.p * (eps - float(s)))
        verdicts.append(
            "convergent" if abs(slope) < CONVERGENCE_SLOPE_THRESHOLD else "divergent"
        )
    return SweepReport(
        s_values=tuple(float(s) for s in s_grid),
        h_min_values=h_grid,
        K=tuple(K_rows),
        fitted_slopes=tuple(slopes),
        predicted_exponents=tuple(predicted),
        verdicts=tuple(verdicts),
        epsilon=eps,
        flatness_r=r,
        p=fp_base.p,
    )


def x1_direction_check(H, sigma_in, u, dom, fp, N=64, M=64, quad=None):
    """x1-direction seminorm of the solved field and its stability.

    The x1 estimate needs no boundary geometry, only s < 1; the ratio is
    guarded by the inflow-data norm in the denominator so the homogeneous
    case H = 0 stays meaningful.
    """
    quad = quad or QuadratureConfig(N=N, M=M)
    res = solve(H, sigma_in, u, dom, N=N, M=M)
    coarse = seminorm_x1(res.sigma, dom, fp, quad)
    res_fine = solve(H, sigma_in, u, dom, N=2 * N, M=2 * M)
    fine = seminorm_x1(res_fine.sigma, dom, fp, quad.refined())
    den_H = norm_star(H, dom, fp, quad, refine=False).norm_star
    den_b = boundary_norm(sigma_in, dom.inflow, fp, quad, measure="arc")
    return {
        "x1_seminorm": coarse,
        "x1_seminorm_refined": fine,
        "drift": abs(fine - coarse) / max(coarse, 1e-300),
        "ratio": coarse / (den_H + den_b),
        "homogeneous_H": den_H == 0.0,
        "s": fp.s,
        "p": fp.p,
    }


def random_family(seed, count):
    """Seeded polynomial/exponential data samples (H text, sigma_in text)."""
    rng = np.random.default_rng(seed)

    def coeff():
        c = rng.uniform(0.25, 1.5) * rng.choice([-1.0, 1.0])
        return f"{c:.3f}"

    family = []
    for _ in range(count):
        H_terms = [coeff()]
        for mono in ("x1", "x2", "x1*x2", "x1^2", "x2^2"):
            if rng.random() < 0.6:
                H_terms.append(f"{coeff()}*{mono}")
        if rng.random() < 0.4:
            H_terms.append(f"{coeff()}*exp({coeff()}*x1)")
        if rng.random() < 0.4:
            H_terms.append(f"{coeff()}*sin({coeff()}*x2)")
        sig_terms = [coeff()]
        for mono in ("x2", "x2^2"):
            if rng.random() < 0.6:
                sig_terms.append(f"{coeff()}*{mono}")
        if rng.random() < 0.4:
            sig_terms.append(f"{coeff()}*cos({coeff()}*x2)")
        family.append((" + ".join(H_terms), " + ".join(sig_terms)))
    return family
