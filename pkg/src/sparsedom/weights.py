"""Multilinear dyadic weights and weighted bounds for sparse operators."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import _scalar as sc
from .carleson import SparseFamily
from .dyadic import DyadicCube, GridFunction, RootCube
from .shifts import eval_sparse_op


@dataclass(eq=False)
class WeightVector:
    """Weights ``w_1..w_k`` with exponents ``p_1..p_k`` in ``(1, inf)``."""

    ws: tuple
    exponents: tuple

    def __post_init__(self):
        self.ws = tuple(self.ws)
        self.exponents = tuple(sc.as_fraction(p) for p in self.exponents)
        if len(self.ws) != len(self.exponents) or not self.ws:
            raise ValueError("need one exponent per weight")
        if any(p <= 1 for p in self.exponents):
            raise ValueError("exponents must exceed 1")
        for w in self.ws:
            if w.root != self.ws[0].root:
                raise ValueError("weights must share a lattice")
            vals = w.values.reshape(-1)
            if vals.size and min(vals) <= 0:
                raise ValueError("weights must be positive")

    @property
    def k(self) -> int:
        return len(self.ws)

    @property
    def root(self) -> RootCube:
        return self.ws[0].root

    @property
    def p(self) -> Fraction:
        return 1 / sum(1 / q for q in self.exponents)

    def dual_exponents(self) -> list[Fraction]:
        return [q / (q - 1) for q in self.exponents]

    def v(self) -> GridFunction:
        """``v = prod_i w_i**(p/p_i)`` leafwise."""
        out = None
        for w, q in zip(self.ws, self.exponents):
            term = sc.rpow_array(w.values, self.p / q)
            out = term if out is None else _mul(out, term)
        return GridFunction(self.root, out)

    def duals(self) -> list[GridFunction]:
        """``sigma_i = w_i**(1 - p_i')``."""
        return [
            GridFunction(self.root, sc.rpow_array(w.values, 1 - qd))
            for w, qd in zip(self.ws, self.dual_exponents())
        ]

    def scaled(self, i: int, c) -> "WeightVector":
        ws = list(self.ws)
        ws[i] = ws[i].scaled(c)
        return WeightVector(tuple(ws), self.exponents)


def _mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if sc.is_exact(a) != sc.is_exact(b):
        return sc.to_float(a) * sc.to_float(b)
    return a * b


def a_p_constant(wv: WeightVector):
    """``max_Q <v>_Q prod_i <w_i**(1-p_i')>_Q**(p/p_i')`` over the lattice.

    The outer power is ``p/p_i'``: with it constant weights give 1 and the
    constant is invariant under rescaling any single ``w_i``.  Both readings
    agree when every ``p_i = 2``.  Exact (a Fraction) whenever every
    fractional power involved is rational.
    """
    v = wv.v()
    duals = wv.duals()
    best = None
    for j in range(wv.root.depth + 1):
        prod = v.averages[j]
        for s, qd in zip(duals, wv.dual_exponents()):
            prod = _mul(prod, sc.rpow_array(s.averages[j], wv.p / qd))
        m = sc.array_max(prod)
        if best is None or m > best:
            best = m
    return best


def sharp_exponent(exponents: Sequence) -> Fraction:
    """``max(1, p_1'/p, ..., p_k'/p)``."""
    ps = [sc.as_fraction(q) for q in exponents]
    p = 1 / sum(1 / q for q in ps)
    return max([Fraction(1)] + [(q / (q - 1)) / p for q in ps])


def weighted_norm(f: GridFunction, w: GridFunction, p) -> float:
    """``(int |f|**p w)**(1/p)`` as a finite leaf sum."""
    p = float(p)
    vals = np.abs(sc.to_float(f.values)) ** p * sc.to_float(w.values)
    return float(vals.sum() * float(f.root.leaf_measure)) ** (1.0 / p)


@dataclass
class WeightedReport:
    lhs: float
    rhs_core: float
    ratio: float
    a_p: float
    exponent: Fraction


def sparse_weighted_check(family: SparseFamily, wv: WeightVector, fs: Sequence[GridFunction], a_p=None):
    """``||A_S f||_{L^p(v)}`` against ``[w]**e prod ||f_i||_{L^{p_i}(w_i)}``."""
    if len(fs) != wv.k:
        raise ValueError("one function per weight")
    out = eval_sparse_op(family, fs)
    lhs = weighted_norm(out, wv.v(), wv.p)
    a_p = float(a_p_constant(wv) if a_p is None else a_p)
    e = sharp_exponent(wv.exponents)
    rhs = a_p ** float(e)
    for f, w, q in zip(fs, wv.ws, wv.exponents):
        rhs *= weighted_norm(f, w, q)
    ratio = lhs / rhs if lhs else 0.0
    return WeightedReport(lhs, rhs, ratio, a_p, e)


# ---------------------------------------------------------------------------
# monotone power-weight ensemble


def power_weight(root: RootCube, a: float) -> GridFunction:
    """Dyadic-valued discretization of ``|x|**a`` (``x`` the distance to the origin corner).

    Each leaf takes the value ``2**round(a log2 |c|)`` with ``c`` the leaf center
    in normalized units, so the weight is exact and rational.
    """
    n = 2 ** root.depth
    centers = (np.arange(n) + 0.5) / n
    grids = np.meshgrid(*([centers] * root.d), indexing="ij")
    r = np.sqrt(sum(g ** 2 for g in grids)) if root.d > 1 else grids[0]
    expo = np.rint(a * np.log2(r)).astype(int)
    vals = np.empty(root.leaf_shape, dtype=object)
    flat = vals.reshape(-1)
    for i, e in enumerate(expo.reshape(-1)):
        flat[i] = Fraction(2) ** int(e)
    return GridFunction(root, vals)


def random_weight(rng, root: RootCube, spread: int = 3) -> GridFunction:
    """Leaf values ``2**e`` with ``e`` uniform in ``[-spread, spread]``."""
    n = int(np.prod(root.leaf_shape))
    expo = rng.integers(-spread, spread + 1, size=n)
    return GridFunction.from_values(root, [Fraction(2) ** int(e) for e in expo])


def corner_chain(root: RootCube) -> SparseFamily:
    """The cubes containing the origin corner: a 1/2-sparse chain."""
    d = root.d
    return SparseFamily(root, frozenset(DyadicCube(j, (0,) * d) for j in range(root.depth + 1)))


@dataclass
class EnsemblePoint:
    a: float
    a_p: float
    ratio: float
    # best lhs / prod ||f_i|| over the test functions
    norm_estimate: float


def _test_functions(wv: WeightVector, family: SparseFamily) -> list[list[GridFunction]]:
    # dual-weight indicators of the chain cubes are the classical extremizers
    root = wv.root
    duals = wv.duals()
    out = []
    for q in sorted(family.cubes):
        fs = []
        for s in duals:
            vals = sc.zeros(root.leaf_shape, False)
            vals[root.leaf_slices(q)] = sc.to_float(s.values[root.leaf_slices(q)])
            fs.append(GridFunction(root, vals))
        out.append(fs)
    return out


def monotone_ensemble(root: RootCube, exponents: Sequence, alphas: Sequence[float]) -> list[EnsemblePoint]:
    """For each power ``a``, weights ``w_i = |x|**(a d (p_i - 1))`` (all slots alike).

    ``[w]`` grows with ``a``; the operator norm on the corner chain is estimated
    by the best test function.
    """
    family = corner_chain(root)
    pts = []
    for a in alphas:
        ws = tuple(power_weight(root, a * root.d * (float(q) - 1)) for q in exponents)
        wv = WeightVector(ws, tuple(exponents))
        ap = float(a_p_constant(wv))
        best, best_ratio = 0.0, 0.0
        for fs in _test_functions(wv, family):
            rep = sparse_weighted_check(family, wv, fs, a_p=ap)
            core = rep.rhs_core / ap ** float(rep.exponent)
            if core and rep.lhs / core > best:
                best, best_ratio = rep.lhs / core, rep.ratio
        pts.append(EnsemblePoint(a, ap, best_ratio, best))
    return pts


def loglog_slope(points: Sequence[EnsemblePoint]) -> float:
    """Least-squares slope of ``log norm_estimate`` against ``log [w]``."""
    xs = np.log([p.a_p for p in points])
    ys = np.log([p.norm_estimate for p in points])
    if np.ptp(xs) == 0:
        return 0.0
    return float(np.polyfit(xs, ys, 1)[0])


def slope_bound(exponents: Sequence) -> float:
    return float(sharp_exponent(exponents)) + 0.1


def ensemble_ok(points: Sequence[EnsemblePoint], exponents: Sequence) -> bool:
    return loglog_slope(points) <= slope_bound(exponents) and all(math.isfinite(p.ratio) for p in points)
