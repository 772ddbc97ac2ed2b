"""Fractional norms of inflow data along the boundary curve.

The curve is parametrized by x2; where it meets a tangency point its
derivative blows up, so arc-length quadrature is graded toward those
endpoints.  Both the arc-length norm (measure and kernel distance along
the curve) and the x2-parameter variant are available; they coincide on
straight vertical boundaries and differ on curved ones.
"""

import numpy as np

from fractrans import FracParams, QuadratureConfig, boundary_norm, lens_domain, rectangle_domain

quad = QuadratureConfig(N=64, M=64)
lens = lens_domain()
rect = rectangle_domain()

# constant data on the lens inflow: the norm is (arc length)^(1/p),
# and the inflow curve is a half circle of radius 1/2 (length pi/2)
for p in (2, 4):
    val = boundary_norm("1", lens.inflow, FracParams(0.5, p), quad, measure="arc")
    print(f"p={p}: |1| on lens inflow = {val:.6f}   (pi/2)^(1/p) = {(np.pi / 2) ** (1 / p):.6f}")

# on the rectangle the two measures coincide
fp = FracParams(0.5, 4)
for measure in ("arc", "param"):
    val = boundary_norm("x2", rect.inflow, fp, QuadratureConfig(N=64, M=128), measure=measure)
    print(f"rect inflow, measure={measure}: |x2| = {val:.6f}")
print("closed form:", (1 / 5) ** 0.25 + (1 / 3) ** 0.25)

# on the lens they differ: arc distance stretches near the poles
arc = boundary_norm("x2", lens.inflow, fp, quad, measure="arc")
par = boundary_norm("x2", lens.inflow, fp, quad, measure="param")
print(f"lens inflow: arc={arc:.6f}  param={par:.6f}")
