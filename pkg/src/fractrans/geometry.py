"""Domains bounded by inflow/outflow graphs over x2.

The domain is the set  {(x1, x2) : a < x2 < b,  ux(x2) < x1 < ox(x2)}
with the inflow boundary on the left curve and the outflow boundary on
the right curve.  Horizontal flow can become tangent to the boundary
where a curve's derivative blows up; those tangency points and the local
flatness exponent r of the boundary around them (boundary gap bounded
below by C * |x1 - y1|^r) are what this module locates and fits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .expr import EvalError, Expr, differentiate, evaluate, parse

__all__ = [
    "GeometryError",
    "BoundaryCurve",
    "DomainSpec",
    "SingularityPoint",
    "PartitionReport",
    "build_domain",
    "classify_boundary",
    "detect_singularities",
    "estimate_flatness",
    "verify_analytic_lower_bound",
    "slice_interval",
    "vertical_cuts",
    "lens_domain",
    "rectangle_domain",
]

# max log-residual below which a flatness fit counts as certified
FLATNESS_FIT_QUALITY_THRESHOLD = 0.1

# derivative magnitude above which a curve counts as vertical at a point
VERTICAL_TANGENT_THRESHOLD = 1e3


class GeometryError(Exception):
    """Ill-posed domain description or failed geometric operation."""


def _as_expr(e):
    return e if isinstance(e, Expr) else parse(e)


@dataclass(frozen=True)
class BoundaryCurve:
    """One lateral boundary graph x1 = curve(x2) on (a, b)."""

    side: str  # "inflow" | "outflow"
    x1_of_x2: Expr
    derivative: Expr
    a: float
    b: float

    def x1(self, x2):
        return evaluate(self.x1_of_x2, 0.0, x2)

    def dx1(self, x2):
        return evaluate(self.derivative, 0.0, x2)

    def endpoint_value(self, x2_end):
        """Curve limit at an interval endpoint, by continuity if needed."""
        try:
            return float(self.x1(x2_end))
        except EvalError:
            eps = 1e-9 * (self.b - self.a)
            probe = x2_end + (eps if x2_end == self.a else -eps)
            return float(self.x1(probe))


@dataclass(frozen=True)
class SingularityPoint:
    """Boundary point where the flow is tangent to the boundary."""

    location: tuple[float, float]
    side: str
    param: float  # x2 value of the point on its curve
    flatness_r: float | None = None
    flatness_C: float | None = None
    fit_quality: float | None = None

    @property
    def flat_certified(self):
        return (
            self.fit_quality is not None
            and self.fit_quality <= FLATNESS_FIT_QUALITY_THRESHOLD
        )


@dataclass(frozen=True)
class DomainSpec:
    a: float
    b: float
    inflow: BoundaryCurve
    outflow: BoundaryCurve
    tangency_in: tuple[float, ...] = ()
    tangency_out: tuple[float, ...] = ()
    # derived geometry, filled by build_domain
    ux_star: float = field(default=math.nan)
    ox_star: float = field(default=math.nan)
    corner_limits: tuple[float, float, float, float] = (math.nan,) * 4  # c1, c2, d1, d2
    gamma0_segments: tuple[tuple[float, float, float], ...] = ()  # (x1_lo, x1_hi, x2)

    def cut(self, x2):
        """Horizontal cut interval (ux(x2), ox(x2)) without validation."""
        return float(self.inflow.x1(x2)), float(self.outflow.x1(x2))

    def cuts(self, x2_values):
        x2_values = np.asarray(x2_values, dtype=float)
        lo = np.broadcast_to(np.asarray(self.inflow.x1(x2_values)), x2_values.shape)
        hi = np.broadcast_to(np.asarray(self.outflow.x1(x2_values)), x2_values.shape)
        return np.array(lo, dtype=float), np.array(hi, dtype=float)


@dataclass(frozen=True)
class PartitionReport:
    inflow_verified: bool
    outflow_verified: bool
    violations: tuple[tuple[str, float, float], ...]  # (side, x2, d)
    d_range_inflow: tuple[float, float]
    d_range_outflow: tuple[float, float]
    gamma0_segments: tuple[tuple[float, float, float], ...]
    gamma_s: tuple[tuple[float, float], ...]
    nsamples: int


def _extreme(curve, mode, nsamples=4097):
    """Sampled inf/sup of a curve over (a, b) with parabolic refinement."""
    t = curve.a + (np.arange(nsamples) + 0.5) * (curve.b - curve.a) / nsamples
    v = np.broadcast_to(np.asarray(curve.x1(t)), t.shape).astype(float)
    v = np.concatenate([[curve.endpoint_value(curve.a)], v, [curve.endpoint_value(curve.b)]])
    t = np.concatenate([[curve.a], t, [curve.b]])
    idx = int(np.argmin(v) if mode == "min" else np.argmax(v))
    best = float(v[idx])
    if 0 < idx < len(t) - 1:
        # parabola through the three best samples, evaluated at its vertex
        t0, t1, t2 = t[idx - 1 : idx + 2]
        v0, v1, v2 = v[idx - 1 : idx + 2]
        denom = (t0 - t1) * (t0 - t2) * (t1 - t2)
        if denom != 0.0:
            a2 = (t2 * (v1 - v0) + t1 * (v0 - v2) + t0 * (v2 - v1)) / denom
            a1 = (t2**2 * (v0 - v1) + t1**2 * (v2 - v0) + t0**2 * (v1 - v2)) / denom
            if a2 != 0.0:
                tv = -a1 / (2 * a2)
                if t0 <= tv <= t2:
                    try:
                        cand = float(curve.x1(tv))
                        best = min(best, cand) if mode == "min" else max(best, cand)
                    except EvalError:
                        pass
    return best


def build_domain(a, b, ux, ox, tangency_in=(), tangency_out=(), nvalidate=512):
    """Build and validate a DomainSpec from the two boundary expressions.

    ``ux`` and ``ox`` are expressions in x2 (strings or parsed); the
    inflow curve must lie weakly left of the outflow curve on (a, b).
    """
    a, b = float(a), float(b)
    if not a < b:
        raise GeometryError(f"need a < b, got a={a}, b={b}")
    ux, ox = _as_expr(ux), _as_expr(ox)
    inflow = BoundaryCurve("inflow", ux, differentiate(ux, "x2"), a, b)
    outflow = BoundaryCurve("outflow", ox, differentiate(ox, "x2"), a, b)

    t = a + (np.arange(nvalidate) + 0.5) * (b - a) / nvalidate
    lo = np.broadcast_to(np.asarray(inflow.x1(t)), t.shape)
    hi = np.broadcast_to(np.asarray(outflow.x1(t)), t.shape)
    gap = np.max(lo - hi)
    if gap > 1e-12 * max(1.0, np.max(np.abs(lo)), np.max(np.abs(hi))):
        worst = float(t[np.argmax(lo - hi)])
        raise GeometryError(
            f"inflow curve exceeds outflow curve (ux <= ox violated), e.g. at x2={worst:.6g}"
        )

    c1 = inflow.endpoint_value(a)
    c2 = inflow.endpoint_value(b)
    d1 = outflow.endpoint_value(a)
    d2 = outflow.endpoint_value(b)
    scale = max(1.0, abs(c1), abs(c2), abs(d1), abs(d2))
    segments = []
    if d1 - c1 > 1e-9 * scale:
        segments.append((c1, d1, a))
    if d2 - c2 > 1e-9 * scale:
        segments.append((c2, d2, b))

    return DomainSpec(
        a=a,
        b=b,
        inflow=inflow,
        outflow=outflow,
        tangency_in=tuple(float(t_) for t_ in tangency_in),
        tangency_out=tuple(float(t_) for t_ in tangency_out),
        ux_star=_extreme(inflow, "min"),
        ox_star=_extreme(outflow, "max"),
        corner_limits=(c1, c2, d1, d2),
        gamma0_segments=tuple(segments),
    )


def lens_domain(power=2):
    """Disk-like domain bounded by +-(x2*(1-x2))^(1/power) over (0, 1).

    power=2 gives the disk of radius 1/2 centered at (0, 1/2); power=4
    the quartic lens.  Both curves meet vertically at (0, 0) and (0, 1).
    """
    root = "sqrt(x2*(1-x2))" if power == 2 else f"(x2*(1-x2))^(1/{power})"
    return build_domain(0.0, 1.0, f"-{root}", root)


def rectangle_domain(a=0.0, b=1.0, left=0.0, right=1.0):
    """Axis-aligned rectangle (left, right) x (a, b); no tangency points."""
    return build_domain(a, b, str(float(left)), str(float(right)))


def _unit_normal(curve, x2):
    """Outward unit normal components (n1, n2) at curve parameter x2."""
    g = np.asarray(curve.dx1(x2), dtype=float)
    g = np.broadcast_to(g, np.shape(x2)) if np.shape(x2) else g
    norm = np.sqrt(1.0 + g * g)
    if curve.side == "inflow":
        return -1.0 / norm, g / norm
    return 1.0 / norm, -g / norm


def classify_boundary(dom, u, nsamples=256, strict=True):
    """Verify the sign convention d = u * n1 < 0 on inflow, > 0 on outflow.

    Samples each curve at ``nsamples`` interior parameters, computes the
    outward normal from the tangent (curve', 1), and reports any sample
    violating its declared sign; a violation means the domain description
    and the velocity are inconsistent (ill-posed) and raises when
    ``strict``.
    """
    t = dom.a + (np.arange(nsamples) + 0.5) * (dom.b - dom.a) / nsamples
    violations = []
    d_ranges = {}
    for curve in (dom.inflow, dom.outflow):
        x1 = np.broadcast_to(np.asarray(curve.x1(t)), t.shape)
        n1, _ = _unit_normal(curve, t)
        uval = np.broadcast_to(np.asarray(u.eval(x1, t)), t.shape)
        d = uval * n1
        d_ranges[curve.side] = (float(np.min(d)), float(np.max(d)))
        bad = d >= 0.0 if curve.side == "inflow" else d <= 0.0
        for tb, db in zip(t[bad], d[bad]):
            violations.append((curve.side, float(tb), float(db)))
    report = PartitionReport(
        inflow_verified=not any(v[0] == "inflow" for v in violations),
        outflow_verified=not any(v[0] == "outflow" for v in violations),
        violations=tuple(violations),
        d_range_inflow=d_ranges["inflow"],
        d_range_outflow=d_ranges["outflow"],
        gamma0_segments=dom.gamma0_segments,
        gamma_s=tuple(
            p.location for p in detect_singularities(dom)
        ),
        nsamples=nsamples,
    )
    if strict and violations:
        side, tb, db = violations[0]
        raise GeometryError(
            f"sign violation on declared {side} curve: d={db:.3g} at x2={tb:.6g}"
        )
    return report


def _deriv_mag(curve, t):
    """|curve'(t)|; probes both sides of an evaluation failure.

    An isolated failure flanked by above-threshold magnitudes is treated
    as a genuine tangency (cusp); a failure in a smooth region re-raises.
    """
    try:
        return abs(float(curve.dx1(t)))
    except EvalError:
        eps = 1e-12 * (curve.b - curve.a)
        try:
            left = abs(float(curve.dx1(t - eps)))
            right = abs(float(curve.dx1(t + eps)))
        except EvalError:
            raise
        if min(left, right) > VERTICAL_TANGENT_THRESHOLD:
            return math.inf
        raise


def _endpoint_singular(curve, endpoint, threshold):
    """Test |curve'| -> inf along a refining sequence into the endpoint."""
    span = curve.b - curve.a
    sign = 1.0 if endpoint == curve.a else -1.0
    mags = []
    for k in range(2, 16):
        t = endpoint + sign * span * 0.25**k
        try:
            mags.append(_deriv_mag(curve, t))
        except EvalError:
            continue
    if len(mags) < 3:
        return False
    tail = mags[-3:]
    return tail[-1] > threshold and tail[0] <= tail[1] <= tail[2] + 1e-30


def _refine_interior(curve, t0, window, threshold):
    """Shrink a window around an interior candidate, tracking |curve'|."""
    lo = max(curve.a, t0 - window)
    hi = min(curve.b, t0 + window)
    best_t, prev_mag = t0, 0.0
    increasing = True
    for _ in range(40):
        ts = np.linspace(lo, hi, 17)[1:-1]
        mags = np.array([_deriv_mag(curve, t) for t in ts])
        i = int(np.argmax(mags))
        best_t, mag = float(ts[i]), float(mags[i])
        if mag < prev_mag * 0.5:
            increasing = False
            break
        prev_mag = max(prev_mag, mag)
        w = (hi - lo) / 6.0
        lo, hi = max(curve.a, best_t - w), min(curve.b, best_t + w)
        if hi - lo < 1e-13 * (curve.b - curve.a) or math.isinf(mag):
            break
    return best_t, (prev_mag > threshold and increasing)


def detect_singularities(dom, threshold=VERTICAL_TANGENT_THRESHOLD, nsamples=512):
    """Locate boundary points where |curve derivative| blows up.

    Inspects the interval endpoints of both curves always, any declared
    interior tangency parameters, and an interior scan at ``nsamples``
    parameters.  Flatness fields are left unfilled; see
    :func:`estimate_flatness`.
    """
    points = []
    declared = {"inflow": dom.tangency_in, "outflow": dom.tangency_out}
    for curve in (dom.inflow, dom.outflow):
        found_params = []
        for endpoint in (dom.a, dom.b):
            if _endpoint_singular(curve, endpoint, threshold):
                found_params.append(endpoint)
        interior = [t for t in declared[curve.side] if dom.a < t < dom.b]
        ts = dom.a + (np.arange(nsamples) + 0.5) * (dom.b - dom.a) / nsamples
        mags = np.array([_deriv_mag(curve, t) for t in ts])
        # candidates: interior local maxima of |curve'| (a narrow cusp may
        # not exceed the threshold at any fixed sample, only under refinement)
        for i in range(2, nsamples - 2):
            if mags[i] >= mags[i - 1] and mags[i] >= mags[i + 1] and mags[i] > 1.0:
                interior.append(float(ts[i]))
        for t0 in interior:
            t_ref, ok = _refine_interior(curve, t0, 2 * (dom.b - dom.a) / nsamples, threshold)
            if ok and not any(abs(t_ref - q) < 1e-9 * (dom.b - dom.a) for q in found_params):
                found_params.append(t_ref)
        for t_ in sorted(found_params):
            x1 = curve.endpoint_value(t_) if t_ in (dom.a, dom.b) else float(curve.x1(t_))
            points.append(SingularityPoint(location=(x1, t_), side=curve.side, param=t_))
    return points


def estimate_flatness(curve, pt, window=1e-2, nsamples=8):
    """Fit the flatness exponent of the boundary around a tangency point.

    Near a vertical tangent x2 is locally a function of x1; the boundary
    gap |x2(x1) - x2(pt)| is sampled against |x1 - x1(pt)| on a geometric
    grid inside ``window`` and r, C are fitted by least squares in log-log
    coordinates.  ``fit_quality`` is the max absolute log residual.
    """
    t_star = pt.param
    x1_star = pt.location[0]
    span = curve.b - curve.a

    # confirm the vertical tangency before attempting an inversion
    probes = [t_star + s * span * 0.25**k for k in range(4, 12) for s in (+1, -1)]
    probes = [t for t in probes if curve.a < t < curve.b]
    mags = []
    for t in probes:
        try:
            mags.append(_deriv_mag(curve, t))
        except EvalError:
            continue
    if not mags or max(mags) < 100.0:
        raise GeometryError(
            f"no vertical tangent at x2={t_star:.6g}; flatness undefined"
        )

    if t_star <= curve.a + 1e-12 * span:
        direction = 1.0
    elif t_star >= curve.b - 1e-12 * span:
        direction = -1.0
    else:
        probe = 1e-6 * span
        gp = abs(float(curve.x1(t_star + probe)) - x1_star)
        gm = abs(float(curve.x1(t_star - probe)) - x1_star)
        direction = 1.0 if gp >= gm else -1.0

    # bracket: grow T from below until the curve has moved `window` in x1,
    # keeping T near-minimal so the inversion stays in the monotone region
    T = 1e-7 * span
    for _ in range(60):
        t_edge = t_star + direction * T
        if not curve.a <= t_edge <= curve.b or T > span:
            raise GeometryError("window wider than the curve's x1 range")
        if abs(float(curve.x1(t_edge)) - x1_star) >= window:
            break
        T *= 2.0
    else:
        raise GeometryError("could not bracket the local inverse")

    ts = t_star + direction * np.linspace(0.0, T, 65)[1:]
    gap = np.abs(np.asarray(curve.x1(ts), dtype=float) - x1_star)
    if np.any(np.diff(gap) <= 0.0):
        raise GeometryError(
            "x2 is not locally a function of x1 in the window (non-monotone inversion)"
        )

    offsets = window * (1.0 / 30.0) ** (np.arange(nsamples) / (nsamples - 1))
    sign1 = math.copysign(1.0, float(curve.x1(t_star + direction * T)) - x1_star)
    ys = []
    for d in offsets:
        target = x1_star + sign1 * d
        lo, hi = t_star, t_star + direction * T
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if (abs(float(curve.x1(mid)) - x1_star) - d) < 0.0:
                lo = mid
            else:
                hi = mid
        ys.append(abs(0.5 * (lo + hi) - t_star))
    ys = np.asarray(ys)
    if np.any(ys <= 0.0) or np.all(ys == ys[0]):
        raise GeometryError("degenerate window: inversion produced no spread")

    logx, logy = np.log(offsets), np.log(ys)
    r_fit, logc = np.polyfit(logx, logy, 1)
    quality = float(np.max(np.abs(logy - (r_fit * logx + logc))))
    # (flat) reads |x2(x1)-x2(y1)| >= C |x1-y1|^r, so C is exp(+intercept)
    return replace(
        pt,
        flatness_r=float(r_fit),
        flatness_C=float(np.exp(logc)),
        fit_quality=quality,
    )


def verify_analytic_lower_bound(f, k=None, window=0.1, nsamples=200, max_order=8):
    """Certify |f(x)| >= C |x|^k near 0 from the Taylor expansion of f.

    ``f`` is a 1D expression in x1 with f(0) = f'(0) = 0.  The order k is
    the first non-vanishing derivative at 0 (a requested ``k`` below that
    order is overridden); the certified constant is
    |f^(k)(0)|/k! - M*window with M the sampled remainder bound.
    """
    val0 = float(evaluate(f, 0.0, 0.0))
    d1 = float(evaluate(differentiate(f, "x1"), 0.0, 0.0))
    if abs(val0) > 1e-12 or abs(d1) > 1e-12:
        raise ValueError("need f(0) = 0 and f'(0) = 0 for the tangency expansion")

    deriv = differentiate(differentiate(f, "x1"), "x1")
    k_found = None
    lead = 0.0
    for order in range(2, max_order + 1):
        coeff = float(evaluate(deriv, 0.0, 0.0)) / math.factorial(order)
        if abs(coeff) > 1e-10:
            k_found = order
            lead = coeff
            break
        deriv = differentiate(deriv, "x1")
    if k_found is None:
        raise GeometryError(
            f"all derivatives up to order {max_order} vanish at 0; cannot certify"
        )
    # a requested order different from k_found is overridden: the bound can
    # only be certified at the first non-vanishing order

    xs = np.linspace(-window, window, nsamples)
    xs = xs[xs != 0.0]
    fx = np.asarray(evaluate(f, xs, 0.0), dtype=float)
    remainder = np.abs(fx - lead * xs**k_found) / np.abs(xs) ** (k_found + 1)
    M = float(np.max(remainder))
    C = abs(lead) - M * window
    holds = bool(C > 0.0 and np.all(np.abs(fx) + 1e-12 >= C * np.abs(xs) ** k_found))
    return {"C": C, "holds": holds, "k": k_found, "leading_coefficient": lead, "remainder_bound": M}


def slice_interval(dom, x2):
    """x1-interval of the horizontal cut at interior height x2."""
    if not dom.a < x2 < dom.b:
        raise GeometryError(f"x2={x2:.6g} is not in the open interval ({dom.a}, {dom.b})")
    lo, hi = dom.cut(x2)
    if lo > hi:
        raise GeometryError(f"empty cut at x2={x2:.6g}: ux={lo:.6g} > ox={hi:.6g}")
    return lo, hi


def vertical_cuts(dom, x1_values, nscan=2048, refine_iters=50):
    """x2-intervals of the vertical cuts at the given x1 stations.

    Returns (lo, hi, nonempty) arrays.  Cuts are required to be single
    intervals (true for the lens-type and rectangular domains this
    toolkit targets); a cut that is a union of intervals raises.
    """
    x1_values = np.atleast_1d(np.asarray(x1_values, dtype=float))
    ts = dom.a + (np.arange(nscan) + 0.5) * (dom.b - dom.a) / nscan
    ux_s, ox_s = dom.cuts(ts)

    inside = (ux_s[None, :] <= x1_values[:, None]) & (ox_s[None, :] >= x1_values[:, None])
    nonempty = inside.any(axis=1)
    first = np.argmax(inside, axis=1)
    last = nscan - 1 - np.argmax(inside[:, ::-1], axis=1)
    counts = inside.sum(axis=1)
    broken = nonempty & (counts != last - first + 1)
    if np.any(broken):
        x1_bad = float(x1_values[np.argmax(broken)])
        raise GeometryError(
            f"vertical cut at x1={x1_bad:.6g} is a union of intervals (unsupported)"
        )

    def _bisect(t_in, t_out):
        # shrink [min, max] brackets of the inside-indicator, all cuts at once
        for _ in range(refine_iters):
            mid = 0.5 * (t_out + t_in)
            lo_m, hi_m = dom.cuts(mid)
            ok = (lo_m <= x1_values) & (x1_values <= hi_m)
            t_in = np.where(ok, mid, t_in)
            t_out = np.where(ok, t_out, mid)
        return t_in

    lo = _bisect(ts[first], ts[np.maximum(first - 1, 0)])
    hi = _bisect(ts[last], ts[np.minimum(last + 1, nscan - 1)])
    lo = np.where(first == 0, dom.a, lo)
    hi = np.where(last == nscan - 1, dom.b, hi)
    lo = np.where(nonempty, lo, np.nan)
    hi = np.where(nonempty, hi, np.nan)
    return lo, hi, nonempty
