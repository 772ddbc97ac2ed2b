"""Characteristics solver for  sigma + u * sigma_x1 = H,  sigma = sigma_in on the inflow curve.

The integrating-factor substitution turns the equation into a pure
x1-derivative: with

    V(x1, x2) = integral of 1/u from ux(x2) to x1 along the slice,

the function e^V * sigma has x1-derivative H * e^V / u, so each slice is
solved by one cumulative quadrature from the inflow endpoint, where V
vanishes and the inflow trace is exact by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expr import Expr, differentiate, evaluate, parse
from .fields import ScalarField, VelocityField, grid_nodes
from .norms import _midpoints

__all__ = [
    "SolveResult",
    "TestFunction",
    "default_test_functions",
    "compute_potential",
    "reduce_rhs",
    "solve",
    "weak_residual",
]


def _as_expr(e):
    return e if isinstance(e, Expr) else parse(e)


def _cumtrapz(y, x):
    """Cumulative trapezoid along the last axis, zero at the first node."""
    dx = np.diff(x, axis=-1)
    avg = 0.5 * (y[..., 1:] + y[..., :-1])
    out = np.zeros_like(y)
    np.cumsum(avg * dx, axis=-1, out=out[..., 1:])
    return out


@dataclass(frozen=True)
class SolveResult:
    sigma: ScalarField
    potential: ScalarField
    sigma_tilde: ScalarField
    H_tilde: ScalarField
    M1: float  # min of e^V / u over the grid
    M2: float  # max of e^V / u over the grid
    N: int
    M: int
    slice_error: np.ndarray  # per-slice quadrature error estimate

    def to_dict(self):
        return {
            "M1": self.M1,
            "M2": self.M2,
            "N": self.N,
            "M": self.M,
            "max_slice_error": float(np.max(self.slice_error)),
        }


@dataclass(frozen=True)
class TestFunction:
    """C^1 test function certified to vanish on the outflow curve."""

    phi: Expr
    vanishes_on_outflow: bool = False
    certified_sup_on_outflow: float = np.inf

    def certify(self, dom, nsamples=256, tol=1e-10):
        z = _midpoints(dom.a, dom.b, nsamples)
        x1 = np.asarray(dom.outflow.x1(z))
        vals = np.abs(np.asarray(evaluate(self.phi, x1, z)))
        sup = float(np.max(vals))
        return TestFunction(
            phi=self.phi,
            vanishes_on_outflow=bool(sup <= tol),
            certified_sup_on_outflow=sup,
        )


def default_test_functions(dom):
    """Family (ox(x2) - x1) * q with q the monomials of degree <= 2.

    The leading factor vanishes on the outflow curve structurally; no
    condition is imposed anywhere else, matching the test class of the
    weak formulation.
    """
    ox_text = str(dom.outflow.x1_of_x2)
    family = []
    for q in ("1", "x1", "x2", "x1^2", "x1*x2", "x2^2"):
        phi = parse(f"(({ox_text}) - x1) * ({q})")
        family.append(TestFunction(phi=phi).certify(dom))
    return family


def compute_potential(u, dom, N, M):
    """Potential V on the standard grid: per-slice cumulative of 1/u.

    V is exactly zero at the inflow node of every slice.
    """
    x2_rows, x1_nodes = grid_nodes(dom, N, M)
    inv_u = 1.0 / np.broadcast_to(
        np.asarray(u.eval(x1_nodes, x2_rows[:, None])), x1_nodes.shape
    )
    V = _cumtrapz(inv_u, x1_nodes)
    return ScalarField.from_grid(dom, V)


def reduce_rhs(H, u, potential):
    """Reduced right side H * e^V / u on the potential's grid.

    Returns (H_tilde, M1, M2) with the recorded bounds of e^V / u.
    """
    g = potential.grid
    factor = np.exp(g.values) / np.broadcast_to(
        np.asarray(u.eval(g.x1_nodes, g.x2_rows[:, None])), g.x1_nodes.shape
    )
    H_vals = np.broadcast_to(
        np.asarray(H.eval(g.x1_nodes, g.x2_rows[:, None])), g.x1_nodes.shape
    )
    H_tilde = ScalarField.from_grid(g.dom, H_vals * factor)
    return H_tilde, float(np.min(factor)), float(np.max(factor))


def solve(H, sigma_in, u, dom, N=64, M=64):
    """Solve the transport problem on the N x M slice-adapted grid.

    ``H`` is a ScalarField (or expression), ``sigma_in`` an expression in
    x2 evaluated along the inflow curve, ``u`` a certified VelocityField.
    The returned sigma matches sigma_in at the inflow nodes exactly.
    """
    if not isinstance(u, VelocityField):
        raise TypeError("velocity must be certified first (see certify_velocity)")
    H = H if isinstance(H, ScalarField) else ScalarField.from_expression(H)
    sigma_in = _as_expr(sigma_in)

    potential = compute_potential(u, dom, N, M)
    H_tilde, M1, M2 = reduce_rhs(H, u, potential)

    g = potential.grid
    inflow_x1 = g.x1_nodes[:, 0]
    sigma_in_vals = np.broadcast_to(
        np.asarray(evaluate(sigma_in, inflow_x1, g.x2_rows)), g.x2_rows.shape
    )
    cumulative = _cumtrapz(H_tilde.grid.values, g.x1_nodes)
    sigma_tilde = sigma_in_vals[:, None] + cumulative
    sigma = np.exp(-g.values) * sigma_tilde

    # per-slice quadrature error: Richardson gap between full and
    # half-resolution cumulative integrals at the outflow node
    if M >= 5:
        coarse = _cumtrapz(H_tilde.grid.values[:, ::2], g.x1_nodes[:, ::2])
        slice_error = np.abs(cumulative[:, -1] - coarse[:, -1]) / 3.0
    else:
        slice_error = np.zeros(N)

    return SolveResult(
        sigma=ScalarField.from_grid(dom, sigma),
        potential=potential,
        sigma_tilde=ScalarField.from_grid(dom, sigma_tilde),
        H_tilde=H_tilde,
        M1=M1,
        M2=M2,
        N=N,
        M=M,
        slice_error=slice_error,
    )


def weak_residual(result, H, sigma_in, u, dom, phis=None, quad=None):
    """Max normalized residual of the weak identity over a phi family.

    For each test function the two sides of

        int sigma (phi - u phi_x1 - u_x1 phi) dx
            = - int_(inflow) d phi sigma_in dS + int H phi dx

    are assembled by midpoint quadrature and compared, normalized by
    |right side| + 1.  On the inflow curve d * dS = -u dx2 exactly (the
    arc-length factors cancel), which keeps the boundary term finite at
    tangency points where the normal itself degenerates.  A finite family
    is a necessary-condition diagnostic, not a proof of solvency.
    """
    from .norms import QuadratureConfig

    quad = quad or QuadratureConfig(N=result.N, M=result.M)
    if phis is None:
        phis = default_test_functions(dom)
    for tf in phis:
        if not tf.vanishes_on_outflow:
            raise ValueError(
                f"test function '{tf.phi}' is not certified to vanish on the "
                f"outflow curve (sup {tf.certified_sup_on_outflow:.3g})"
            )
    H = H if isinstance(H, ScalarField) else ScalarField.from_expression(H)
    sigma_in = _as_expr(sigma_in)
    du_dx1 = differentiate(u.u, "x1")

    z = _midpoints(dom.a, dom.b, quad.N)
    lo, hi = dom.cuts(z)
    dz = (dom.b - dom.a) / quad.N
    widths = hi - lo
    t = (np.arange(quad.M) + 0.5) / quad.M
    X1 = lo[:, None] + t[None, :] * widths[:, None]
    X2 = np.broadcast_to(z[:, None], X1.shape)
    W = dz * (widths / quad.M)[:, None] * np.ones_like(X1)

    sigma_vals = np.asarray(result.sigma.eval(X1, X2), dtype=float)
    H_vals = np.broadcast_to(np.asarray(H.eval(X1, X2)), X1.shape)
    u_vals = np.broadcast_to(np.asarray(u.eval(X1, X2)), X1.shape)
    du_vals = np.broadcast_to(np.asarray(evaluate(du_dx1, X1, X2)), X1.shape)

    # inflow line: d * dS = -u dx2, so the boundary term is + int u phi sigma_in dx2
    bx1 = np.asarray(dom.inflow.x1(z))
    b_u = np.broadcast_to(np.asarray(u.eval(bx1, z)), z.shape)
    b_sig = np.broadcast_to(np.asarray(evaluate(sigma_in, bx1, z)), z.shape)

    worst = 0.0
    for tf in phis:
        phi_vals = np.broadcast_to(np.asarray(evaluate(tf.phi, X1, X2)), X1.shape)
        dphi_vals = np.broadcast_to(
            np.asarray(evaluate(differentiate(tf.phi, "x1"), X1, X2)), X1.shape
        )
        lhs = np.sum(W * sigma_vals * (phi_vals - u_vals * dphi_vals - du_vals * phi_vals))
        b_phi = np.broadcast_to(np.asarray(evaluate(tf.phi, bx1, z)), z.shape)
        rhs = dz * np.sum(b_u * b_phi * b_sig) + np.sum(W * H_vals * phi_vals)
        worst = max(worst, float(abs(lhs - rhs) / (abs(rhs) + 1.0)))
    return worst
