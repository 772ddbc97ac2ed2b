"""Closed-form expressions: parsing, evaluation, exact derivatives.

Every input of the toolkit (velocity, data, boundary curves) is a
closed-form expression in x1 and x2.  This demo shows the grammar, the
error behavior outside a function's domain, and the agreement of the
symbolic derivative with central differences.
"""

import numpy as np

from fractrans import EvalError, differentiate, evaluate, parse

# parse once, evaluate anywhere (scalars or arrays)
e = parse("x1^2 + exp(-x2)")
print("e(x1,x2) =", e)
print("e(1, 0)  =", evaluate(e, 1.0, 0.0))
x = np.linspace(0.0, 1.0, 5)
print("e(x, 0)  =", evaluate(e, x, 0.0))

# evaluation outside a domain of definition raises instead of emitting NaN
try:
    evaluate(parse("sqrt(x1 - 2)"), 0.0, 0.0)
except EvalError as exc:
    print("domain violation ->", exc)

# exact symbolic derivatives; central differences agree to ~1e-10
f = parse("sin(x1*x2) / (1 + x1^2)")
df = differentiate(f, "x1")
print("df/dx1 =", df)
step = 1e-5
for point in [(0.3, 0.7), (1.2, -0.4)]:
    fd = (evaluate(f, point[0] + step, point[1]) - evaluate(f, point[0] - step, point[1])) / (
        2 * step
    )
    print(f"  at {point}: symbolic {evaluate(df, *point):+.8f}  central-diff {fd:+.8f}")
