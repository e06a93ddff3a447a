"""Weighted bound for a sparse form against growing power weights.

Prints the A_P constant, the estimated operator norm on the corner chain,
and the log-log slope of that norm against [w], which should stay below the
sharp exponent plus 0.1.

    python3 demos/weights_slope.py
"""
from fractions import Fraction

from sparsedom import RootCube
from sparsedom.weights import loglog_slope, monotone_ensemble, sharp_exponent, slope_bound

alphas = [0.1 * i for i in range(10)]
for d, exps in [(1, (2,)), (1, (Fraction(3, 2),)), (1, (2, 2)), (2, (3,))]:
    root = RootCube(d, depth=6 // d)
    pts = monotone_ensemble(root, exps, alphas)
    print(f"d={d}, p_i = {[str(q) for q in exps]}, sharp exponent {sharp_exponent(exps)}")
    for p in pts[::3]:
        print(f"   [w] = {float(p.a_p):9.3f}   norm estimate = {p.norm_estimate:9.4f}")
    print(f"   slope {loglog_slope(pts):.3f} <= {slope_bound(exps):.2f}")
