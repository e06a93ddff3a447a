"""Shift-side assembly for kernels with a modulus of continuity.

Families of cubes live in the ``3**d`` shifted grids ``D^rho``.  Each grid's
cubes are re-addressed on a finite lattice under a common grid ancestor (see
:class:`GridLattice`), so the complexity-0 machinery of :mod:`domination`
applies unchanged.  Cross-grid sums are compared on the *fine cells* of side
``2**-N / 3``, which refine every grid cube of level ``<= N`` and every base
leaf.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy import integrate

from . import _scalar as sc
from .carleson import (
    CoefficientSequence,
    SparseFamily,
    check_sparse_canonical,
    check_sparse_packing,
    indicator_sequence,
)
from .domination import DominationResult, compare_pointwise, dominate_m0
from .dyadic import DyadicCube, GridCube, GridFunction, RootCube, grid_cell, one_third_cover
from .shifts import ShiftInstance, eval_shift, eval_sparse_op


class DivergenceWarning(RuntimeWarning):
    pass


class GridMismatch(ValueError):
    pass


# ---------------------------------------------------------------------------
# moduli of continuity


@dataclass(frozen=True)
class ModulusOfContinuity:
    """``omega`` on ``(0, 1]``; ``closed_integral`` is the exact log-Dini integral if known."""

    func: Callable[[float], float]
    name: str = "custom"
    closed_integral: object = None
    # exact evaluator on dyadic points, m -> omega(2**-m), when available
    dyadic_exact: Callable[[int], Fraction] | None = None

    def __call__(self, t):
        return self.func(t)

    def at_dyadic(self, m: int):
        if self.dyadic_exact is not None:
            return self.dyadic_exact(m)
        return self.func(2.0 ** (-m))

    @classmethod
    def power(cls, delta) -> "ModulusOfContinuity":
        """``t**delta``; log-Dini integral ``1/delta + 1/delta**2``."""
        delta = sc.as_fraction(delta)
        if delta <= 0:
            raise ValueError("delta must be positive")
        exact = (lambda m: Fraction(1, 2 ** (m * int(delta)))) if delta.denominator == 1 else None
        df = float(delta)
        return cls(lambda t: t ** df, f"power({delta})", 1 / delta + 1 / delta ** 2, exact)

    @classmethod
    def log_power(cls, delta) -> "ModulusOfContinuity":
        """``t**delta (1 + log(1/t))``; integral ``1/delta + 2/delta**2 + 2/delta**3``.

        Nondecreasing on ``(0, 1]`` only for ``delta >= 1``; smaller ``delta``
        bends down on ``(exp(1 - 1/delta), 1]``.
        """
        delta = sc.as_fraction(delta)
        if delta <= 0:
            raise ValueError("delta must be positive")
        df = float(delta)
        return cls(
            lambda t: t ** df * (1 + math.log(1 / t)),
            f"log_power({delta})",
            1 / delta + 2 / delta ** 2 + 2 / delta ** 3,
        )

    @classmethod
    def zero(cls) -> "ModulusOfContinuity":
        return cls(lambda t: 0.0, "zero", Fraction(0), lambda m: Fraction(0))

    def is_nondecreasing(self, M: int = 60) -> bool:
        """Checked on the dyadic points ``2**-M < ... < 1``."""
        vals = [float(self.at_dyadic(m)) for m in range(M, -1, -1)]
        return all(v >= 0 for v in vals) and all(a <= b for a, b in zip(vals, vals[1:]))


def dini_weight(omega: ModulusOfContinuity, m: int):
    """``w_m = omega(2**-m) (m + 1)``."""
    return omega.at_dyadic(m) * (m + 1)


def log_dini_integral(omega: ModulusOfContinuity, max_pieces: int = 1000, tol: float = 1e-15) -> float:
    """``int_0^1 omega(t) (1 + log(1/t)) dt/t`` by quadrature on ``[2**-(j+1), 2**-j]``."""
    if omega.closed_integral is not None:
        return omega.closed_integral
    total = 0.0
    small = 0
    for j in range(max_pieces):
        a, b = 2.0 ** (-(j + 1)), 2.0 ** (-j)
        piece, _ = integrate.quad(lambda t: omega(t) * (1 + math.log(1 / t)) / t, a, b)
        total += piece
        small = small + 1 if piece <= tol * max(total, 1e-300) else 0
        if small >= 5:
            return total
    warnings.warn(f"log-Dini integral of {omega.name} shows no tail decay", DivergenceWarning)
    return total


@dataclass
class LogDiniReport:
    series: object
    integral: object
    ratio: float | None
    M: int


def log_dini_series(omega: ModulusOfContinuity, M: int, tail_tol: float = 1e-2) -> LogDiniReport:
    """``sum_{m <= M} omega(2**-m)(m+1)`` next to the log-Dini integral."""
    terms = [dini_weight(omega, m) for m in range(M + 1)]
    if all(isinstance(t, Fraction) for t in terms):
        series = sum(terms, Fraction(0))
    else:
        series = math.fsum(float(t) for t in terms)
    if float(terms[-1]) > tail_tol:
        warnings.warn(
            f"log-Dini series of {omega.name} not settled at M={M}: last term {float(terms[-1]):.3g}",
            DivergenceWarning,
        )
    integral = log_dini_integral(omega)
    ratio = float(series) / float(integral) if integral else None
    return LogDiniReport(series, integral, ratio, M)


# ---------------------------------------------------------------------------
# families in shifted grids


@dataclass(frozen=True)
class WeightedFamily:
    rho: tuple
    m: int
    weight: Fraction
    cubes: frozenset

    def __post_init__(self):
        object.__setattr__(self, "rho", tuple(int(r) for r in self.rho))
        object.__setattr__(self, "weight", sc.as_fraction(self.weight))
        object.__setattr__(self, "cubes", frozenset(self.cubes))
        if self.weight < 0:
            raise ValueError("weights must be nonnegative")
        for c in self.cubes:
            if c.rho != self.rho:
                raise GridMismatch(f"{c} does not belong to the grid rho={self.rho}")


@dataclass(frozen=True)
class GridLattice:
    """The cubes of ``D^rho`` inside ``top`` down to the absolute level ``finest``."""

    top: GridCube
    finest: int

    @property
    def rho(self) -> tuple:
        return self.top.rho

    @property
    def d(self) -> int:
        return len(self.top.rho)

    @property
    def depth(self) -> int:
        return self.finest - self.top.level

    def root(self) -> RootCube:
        lo = [b[0] for b in self.top.bounds()]
        return RootCube(self.d, self.top.side, tuple(lo), self.depth)

    def local(self, cube: GridCube) -> DyadicCube:
        if cube.rho != self.rho:
            raise GridMismatch(f"{cube} is not in the grid rho={self.rho}")
        if not (self.top.level <= cube.level <= self.finest) or not self.top.contains_box(cube.bounds()):
            raise ValueError(f"{cube} lies outside the lattice of {self.top}")
        idx = []
        for (lo, _), (tlo, _) in zip(cube.bounds(), self.top.bounds()):
            q = (lo - tlo) / cube.side
            assert q.denominator == 1
            idx.append(int(q))
        return DyadicCube(cube.level - self.top.level, tuple(idx))

    def grid(self, cube: DyadicCube) -> GridCube:
        side = self.top.side / 2 ** cube.level
        lo = [tlo + k * side for (tlo, _), k in zip(self.top.bounds(), cube.index)]
        return grid_cell(self.rho, self.top.level + cube.level, lo)

    def fine_span(self) -> list[tuple[int, int]]:
        """Per-axis fine-cell range ``[a, b)`` covered by ``top``."""
        scale = 3 * 2 ** self.finest
        out = []
        for lo, hi in self.top.bounds():
            a, b = lo * scale, hi * scale
            assert a.denominator == 1 and b.denominator == 1
            out.append((int(a), int(b)))
        return out


def common_ancestor(cubes: Iterable[GridCube]) -> GridCube:
    """Smallest cube of the grid containing every cube given (one grid only)."""
    cubes = list(cubes)
    if not cubes:
        raise ValueError("need at least one cube")
    rho = cubes[0].rho
    if any(c.rho != rho for c in cubes):
        raise GridMismatch("cubes from different grids have no common ancestor")
    top = min(cubes, key=lambda c: c.level)
    cand = top
    while not all(cand.contains_box(c.bounds()) for c in cubes):
        cand = cand.parent()
    return cand


def grid_lattices(families: Sequence[WeightedFamily], finest: int) -> dict[tuple, GridLattice]:
    """One :class:`GridLattice` per populated grid, topped by the common ancestor."""
    by_rho: dict[tuple, list] = {}
    for fam in families:
        by_rho.setdefault(fam.rho, []).extend(fam.cubes)
    out = {}
    for rho, cubes in sorted(by_rho.items()):
        if not cubes:
            continue
        if finest <= max(c.level for c in cubes):
            raise ValueError("finest level must lie strictly below every family cube")
        out[rho] = GridLattice(common_ancestor(cubes), finest)
    return out


@dataclass
class RegroupedGrid:
    lattice: GridLattice
    mu: CoefficientSequence
    weights: list
    # Carleson bound from subadditivity, sum_m w_m * packing constant
    norm_bound: object
    half_sparse: bool

    @property
    def norm_ok(self) -> bool:
        ok = self.mu.norm <= self.norm_bound
        if self.half_sparse:
            ok = ok and self.mu.norm <= 2 * sum(self.weights, Fraction(0))
        return bool(ok)


def local_family(fam: WeightedFamily, lattice: GridLattice) -> SparseFamily:
    return SparseFamily(lattice.root(), frozenset(lattice.local(c) for c in fam.cubes))


def regroup_families(
    families: Sequence[WeightedFamily], finest: int | None = None, base_depth: int = 0
) -> dict[tuple, RegroupedGrid]:
    """``mu^rho_Q = sum_m w_m 1[Q in S^{rho,m}]`` on one lattice per grid.

    ``finest`` defaults to one level below the deepest family cube (and at
    least ``base_depth``), so that no coefficient sits on the finest level.
    """
    if finest is None:
        finest = max((c.level for f in families for c in f.cubes), default=0) + 1
        finest = max(finest, base_depth)
    lattices = grid_lattices(families, finest)
    out = {}
    for rho, lat in lattices.items():
        root = lat.root()
        mu = CoefficientSequence.zeros(root)
        weights, bound, half = [], Fraction(0), True
        for fam in families:
            if fam.rho != rho:
                continue
            loc = local_family(fam, lat)
            mu = mu + indicator_sequence(loc, fam.weight)
            weights.append(fam.weight)
            bound += fam.weight * check_sparse_packing(loc).packing_constant
            half &= check_sparse_canonical(loc, Fraction(1, 2)).passed
        out[rho] = RegroupedGrid(lat, mu, weights, bound, half)
    return out


def cover_families(family: SparseFamily, m: int, weight=1) -> list[WeightedFamily]:
    """``F^rho_m = {R_{Q,m} : Q in S}`` split by grid, each with the given weight.

    ``family`` lives on a base lattice with unit root at the origin.
    """
    by_rho: dict[tuple, set] = {}
    for q in family.cubes:
        rho, r = one_third_cover(q, m)
        by_rho.setdefault(rho, set()).add(r)
    return [WeightedFamily(rho, m, weight, frozenset(cs)) for rho, cs in sorted(by_rho.items())]


# ---------------------------------------------------------------------------
# common refinement


@dataclass
class FineBox:
    """Fine cells of side ``2**-finest / 3`` over a per-axis integer range."""

    finest: int
    span: list

    @property
    def shape(self) -> tuple:
        return tuple(b - a for a, b in self.span)

    def window(self, span) -> tuple:
        return tuple(slice(a - a0, b - a0) for (a, b), (a0, _) in zip(span, self.span))


def fine_box(lattices: Iterable[GridLattice], base_root: RootCube, finest: int) -> FineBox:
    n = 3 * 2 ** finest
    lo = [0] * base_root.d
    hi = [n] * base_root.d
    for lat in lattices:
        for ax, (a, b) in enumerate(lat.fine_span()):
            lo[ax] = min(lo[ax], a)
            hi[ax] = max(hi[ax], b)
    return FineBox(finest, list(zip(lo, hi)))


def _check_base(f: GridFunction):
    r = f.root
    if r.side != 1 or any(c != 0 for c in r.corner):
        raise ValueError("base functions must live on the unit root at the origin")


def to_fine(f: GridFunction, box: FineBox) -> np.ndarray:
    """Leaf values of a base function on the fine cells (zero off the base root)."""
    _check_base(f)
    if box.finest < f.root.depth:
        raise ValueError("fine cells must refine the base leaves (pass base_depth to regroup_families)")
    out = sc.zeros(box.shape, f.exact)
    rep = sc.upsample(f.values, 3 * 2 ** (box.finest - f.root.depth))
    n = 3 * 2 ** box.finest
    out[box.window([(0, n)] * f.root.d)] = rep
    return out


def project(f: GridFunction, lattice: GridLattice, box: FineBox) -> GridFunction:
    """The base function seen on a grid lattice.

    Each grid leaf is a block of ``3**d`` fine cells; its value is the block
    mean, which keeps every grid-cube average exact.
    """
    fine = to_fine(f, box)
    block = fine[box.window(lattice.fine_span())]
    return GridFunction(lattice.root(), sc.block_mean(block, 3))


def lattice_to_fine(values: np.ndarray, lattice: GridLattice, box: FineBox) -> np.ndarray:
    out = sc.zeros(box.shape, sc.is_exact(values))
    out[box.window(lattice.fine_span())] = sc.upsample(values, 3)
    return out


def regroup_identity(
    families: Sequence[WeightedFamily], regrouped: Mapping[tuple, RegroupedGrid], fs: Sequence[GridFunction]
) -> bool:
    """``sum_rho A^0_{mu^rho} f == sum_{rho,m} w_m A_{S^{rho,m}} f`` on the fine cells."""
    lats = [g.lattice for g in regrouped.values()]
    finest = lats[0].finest if lats else fs[0].root.depth
    box = fine_box(lats, fs[0].root, finest)
    exact = all(f.exact for f in fs)
    left = sc.zeros(box.shape, exact)
    right = sc.zeros(box.shape, exact)
    for rho, g in regrouped.items():
        pf = tuple(project(f, g.lattice, box) for f in fs)
        left = left + lattice_to_fine(eval_shift(ShiftInstance(g.mu, pf, 0)).values, g.lattice, box)
        for fam in families:
            if fam.rho == rho:
                op = eval_sparse_op(local_family(fam, g.lattice), pf).values
                right = right + lattice_to_fine(op * sc.const(fam.weight, exact), g.lattice, box)
    if exact:
        return bool((left == right).all())
    return bool(np.allclose(left, right, rtol=1e-9, atol=1e-12))


@dataclass
class AssemblyResult:
    results: dict
    lattices: dict
    box: FineBox
    certified: bool
    empirical_ratio: object
    lhs: np.ndarray = field(repr=False, default=None)
    rhs: np.ndarray = field(repr=False, default=None)

    def families(self) -> dict:
        """Output families per grid, as grid cubes."""
        out = {}
        for rho, res in self.results.items():
            lat = self.lattices[rho]
            out[rho] = sorted(lat.grid(q) for q in res.family.cubes)
        return out


def assemble_domination(
    regrouped: Mapping[tuple, RegroupedGrid], fs: Sequence[GridFunction], constants: str = "printed"
) -> AssemblyResult:
    """One complexity-0 domination per grid, then the summed bound on the fine cells.

    Certified statement: ``sum_rho A^0_{mu^rho} f <= sum_rho C_rho A^0_{S'_rho} f``
    leafwise on the common refinement, where ``C_rho = C_1 ||mu^rho||``
    (see :func:`dominate_m0` for ``constants``).
    """
    exact = all(f.exact for f in fs)
    lats = {rho: g.lattice for rho, g in regrouped.items()}
    finest = max((l.finest for l in lats.values()), default=fs[0].root.depth)
    if any(l.finest != finest for l in lats.values()):
        raise ValueError("grid lattices must share their finest level")
    box = fine_box(lats.values(), fs[0].root, finest)
    lhs = sc.zeros(box.shape, exact)
    rhs = sc.zeros(box.shape, exact)
    results: dict[tuple, DominationResult] = {}
    ok = True
    for rho, g in sorted(regrouped.items()):
        pf = tuple(project(f, g.lattice, box) for f in fs)
        mu = g.mu if exact else g.mu.as_float()
        res = dominate_m0(mu, pf, constants)
        results[rho] = res
        ok &= res.certified and res.sparsity_pass and res.stages_ok
        part = eval_shift(ShiftInstance(mu, pf, 0)).values
        lhs = lhs + lattice_to_fine(part, g.lattice, box)
        dom = eval_sparse_op(res.family, pf).values * sc.const(res.c_theory, exact)
        rhs = rhs + lattice_to_fine(dom, g.lattice, box)
    total_ok, ratio = compare_pointwise(lhs, rhs, 1, exact)
    return AssemblyResult(results, lats, box, bool(ok and total_ok), ratio, lhs, rhs)
