"""Evaluable scalar fields on the closed domain and the certified velocity.

Grid-backed fields live on a slice-adapted grid: rows at the midpoints
x2_j of N uniform slices of (a, b), and M nodes per row spread uniformly
over the horizontal cut (ux(x2_j), ox(x2_j)) including both ends.
Interpolation is bilinear in the slice-adapted coordinates (t, x2) with
t the relative position inside the cut, so every point of the closed
domain maps into the unit square of the grid up to half a cell.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .expr import Expr, evaluate, parse

__all__ = [
    "AssumptionError",
    "ScalarField",
    "VelocityField",
    "certify_velocity",
    "sample_field",
    "grid_nodes",
    "write_field_csv",
    "read_field_csv",
]


class AssumptionError(Exception):
    """A standing assumption (positive velocity, parameter regime) fails."""


def _as_expr(e):
    return e if isinstance(e, Expr) else parse(e)


class ScalarField:
    """Function on the closed domain, expression-backed or grid-backed."""

    def __init__(self, expr=None, grid=None):
        if (expr is None) == (grid is None):
            raise ValueError("exactly one of expr/grid must be given")
        self.expr = expr
        self.grid = grid

    @classmethod
    def from_expression(cls, e):
        return cls(expr=_as_expr(e))

    @classmethod
    def from_grid(cls, dom, values):
        """Grid backing from a (N, M) value array on the standard grid."""
        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 2:
            raise ValueError("grid values must be (N, M) with M >= 2")
        return cls(grid=_Grid(dom, values))

    @property
    def is_grid(self):
        return self.grid is not None

    def eval(self, x1, x2):
        if self.expr is not None:
            return evaluate(self.expr, x1, x2)
        return self.grid.eval(x1, x2)[0]

    __call__ = eval

    def clamp_cells(self, x1, x2):
        """Max interpolation clamp distance, in cells (0 for expressions)."""
        if self.expr is not None:
            return 0.0
        return self.grid.eval(x1, x2)[1]


class _Grid:
    def __init__(self, dom, values):
        self.dom = dom
        self.values = values
        N, M = values.shape
        self.N, self.M = N, M
        self.dz = (dom.b - dom.a) / N
        self.x2_rows = dom.a + (np.arange(N) + 0.5) * self.dz
        self.row_lo, self.row_hi = dom.cuts(self.x2_rows)
        t = np.arange(M) / (M - 1)
        self.x1_nodes = self.row_lo[:, None] + t[None, :] * (
            self.row_hi - self.row_lo
        )[:, None]

    def eval(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        shape = np.broadcast_shapes(x1.shape, x2.shape)
        # cut coordinates; scalar x2 (whole-row queries) avoids re-evaluating
        # the boundary expressions over the full point set
        if x2.ndim == 0:
            lo, hi = self.dom.cut(float(x2))
        else:
            lo, hi = self.dom.cuts(np.broadcast_to(x2, shape).ravel())
        x1 = np.broadcast_to(x1, shape).ravel()
        x2 = np.broadcast_to(x2, shape).ravel()
        N, M = self.N, self.M

        jf = (x2 - self.x2_rows[0]) / self.dz if N > 1 else np.zeros_like(x2)
        j0 = np.clip(np.floor(jf).astype(int), 0, max(N - 2, 0))
        theta = np.clip(jf - j0, 0.0, 1.0)
        clamp = np.maximum(0.0, -jf) if N > 1 else np.zeros_like(x2)
        clamp = np.maximum(clamp, jf - (N - 1)) if N > 1 else clamp

        width = hi - lo
        safe = width > 1e-300
        t = np.where(safe, (x1 - lo) / np.where(safe, width, 1.0), 0.5)
        clamp = np.maximum(clamp, np.maximum(0.0, -t) * (M - 1))
        clamp = np.maximum(clamp, np.maximum(0.0, t - 1.0) * (M - 1))
        t = np.clip(t, 0.0, 1.0)

        s = t * (M - 1)
        i0 = np.clip(np.floor(s).astype(int), 0, M - 2)
        frac = s - i0

        v00 = self.values[j0, i0]
        v01 = self.values[j0, i0 + 1]
        row0 = v00 * (1.0 - frac) + v01 * frac
        if N > 1:
            v10 = self.values[j0 + 1, i0]
            v11 = self.values[j0 + 1, i0 + 1]
            row1 = v10 * (1.0 - frac) + v11 * frac
            out = (1.0 - theta) * row0 + theta * row1
        else:
            out = row0
        out = out.reshape(shape)
        if out.ndim == 0:
            return float(out), float(np.max(clamp, initial=0.0))
        return out, float(np.max(clamp, initial=0.0))


def grid_nodes(dom, N, M):
    """Standard slice-adapted grid coordinates: (x2_rows [N], x1_nodes [N, M])."""
    dz = (dom.b - dom.a) / N
    x2_rows = dom.a + (np.arange(N) + 0.5) * dz
    lo, hi = dom.cuts(x2_rows)
    t = np.arange(M) / (M - 1)
    return x2_rows, lo[:, None] + t[None, :] * (hi - lo)[:, None]


def sample_field(e, dom, N, M):
    """Sample an expression onto the standard grid; exact at the nodes."""
    if N < 1 or M < 2:
        raise ValueError("need N >= 1 slices and M >= 2 nodes per slice")
    e = _as_expr(e)
    x2_rows, x1_nodes = grid_nodes(dom, N, M)
    values = evaluate(e, x1_nodes, x2_rows[:, None])
    return ScalarField.from_grid(dom, np.broadcast_to(values, x1_nodes.shape))


@dataclass(frozen=True)
class VelocityField:
    """Horizontal velocity [u, 0] with a certified positive lower bound."""

    u: Expr
    lower: float
    upper: float
    lipschitz: float
    margin: float

    def eval(self, x1, x2):
        return evaluate(self.u, x1, x2)

    __call__ = eval


def certify_velocity(u, dom, nsamples=256):
    """Certify u >= lower > 0 on the closed domain by ladder sampling.

    Samples on nested dyadic grids up to ``nsamples`` per axis; each level
    contributes (sampled min) - (sampled Lipschitz estimate) * (cell
    diameter) and the certified bound is the minimum over levels, so
    enlarging ``nsamples`` never increases it.  Raises AssumptionError
    when the certified bound is not positive.
    """
    u = _as_expr(u)
    levels = [8]
    while levels[-1] * 2 <= nsamples:
        levels.append(levels[-1] * 2)
    if levels[-1] != nsamples and nsamples > 8:
        levels.append(int(nsamples))

    lower = np.inf
    upper = -np.inf
    lip = 0.0
    margin_used = 0.0
    for k in levels:
        x2 = np.linspace(dom.a, dom.b, k)
        lo, hi = dom.cuts(x2)
        t = np.linspace(0.0, 1.0, k)
        x1 = lo[:, None] + t[None, :] * (hi - lo)[:, None]
        vals = np.broadcast_to(
            np.asarray(evaluate(u, x1, x2[:, None])), x1.shape
        ).astype(float)

        dx_h = np.diff(x1, axis=1)
        dv_h = np.diff(vals, axis=1)
        mask = np.abs(dx_h) > 1e-14
        lip_h = np.max(np.abs(dv_h[mask]) / np.abs(dx_h[mask])) if mask.any() else 0.0
        dz = x2[1] - x2[0]
        dist_v = np.sqrt(np.diff(x1, axis=0) ** 2 + dz**2)
        lip_v = np.max(np.abs(np.diff(vals, axis=0)) / dist_v)
        L = max(lip_h, lip_v)

        cell = np.hypot(np.max(np.abs(dx_h), initial=0.0), dz)
        level_margin = L * cell
        lower_k = float(np.min(vals)) - level_margin
        if lower_k < lower:
            lower = lower_k
            margin_used = level_margin
        upper = max(upper, float(np.max(vals)) + level_margin)
        lip = max(lip, L)

    if not lower > 0.0:
        raise AssumptionError(
            f"velocity lower bound {lower:.6g} is not positive; "
            "the transport problem is outside the certified regime"
        )
    return VelocityField(u=u, lower=float(lower), upper=float(upper), lipschitz=float(lip), margin=float(margin_used))


def write_field_csv(field, path):
    """Write a grid-backed field as rows of (x2, x1, value)."""
    if not field.is_grid:
        raise ValueError("only grid-backed fields have a canonical CSV layout")
    g = field.grid
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x2", "x1", "value"])
        for j in range(g.N):
            for i in range(g.M):
                w.writerow([repr(float(g.x2_rows[j])), repr(float(g.x1_nodes[j, i])), repr(float(g.values[j, i]))])


def read_field_csv(dom, path):
    """Read a field written by :func:`write_field_csv` back onto its grid."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    x2 = np.array([float(r[0]) for r in rows])
    vals = np.array([float(r[2]) for r in rows])
    n_rows = len(np.unique(x2))
    values = vals.reshape(n_rows, -1)
    return ScalarField.from_grid(dom, values)
