"""Positive multilinear dyadic shifts, their scale slices and sparse operators.

All operators return :class:`GridFunction` objects evaluated leafwise.  The
evaluation runs generation by generation: the contribution of generation ``j``
is a level-``j`` array that is pushed down to the leaves by repeated
replication, so the cost is linear in the number of lattice cubes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _scalar as sc
from .carleson import CoefficientSequence, SparseFamily, indicator_sequence
from .dyadic import DyadicCube, GridFunction, RootCube, embed


class SupportLevelError(ValueError):
    """Coefficients live on generations the operator cannot use."""


def product_of_averages(fs: Sequence[GridFunction]) -> list[np.ndarray]:
    """``prod[j][Q] = prod_i <f_i>_Q`` for every generation ``j``."""
    prod = [a for a in fs[0].averages]
    for f in fs[1:]:
        prod = [p * a for p, a in zip(prod, f.averages)]
    return prod


def push_to_leaves(terms: Sequence[np.ndarray | None], root: RootCube, exact: bool) -> np.ndarray:
    """Leaf values of ``sum_j sum_{Q in D_j} terms[j][Q] 1_Q``."""
    acc = None
    for j in range(root.depth + 1):
        if acc is not None:
            acc = sc.upsample(acc, 2)
        t = terms[j]
        if t is None:
            continue
        acc = t if acc is None else acc + t
    if acc is None:
        return sc.zeros(root.leaf_shape, exact)
    # acc lives at the last generation that carried a term
    return sc.upsample(acc, root.leaf_shape[0] // acc.shape[0])


@dataclass(eq=False)
class ShiftInstance:
    """``A^m_alpha (f_1, ..., f_k)`` on the lattice of ``alpha``."""

    alpha: CoefficientSequence
    fs: tuple
    m: int = 0

    def __post_init__(self):
        self.fs = tuple(self.fs)
        if not self.fs:
            raise ValueError("need at least one input function")
        if self.m < 0:
            raise ValueError("complexity must be nonnegative")
        for f in self.fs:
            if f.root != self.alpha.root:
                raise ValueError("inputs must live on the coefficient lattice")
        low = [j for j in self.alpha.support_levels() if j < self.m]
        if low:
            raise SupportLevelError(
                f"coefficients on generation {low[0]} < m={self.m} have no m-th parent"
            )

    @property
    def k(self) -> int:
        return len(self.fs)

    @property
    def root(self) -> RootCube:
        return self.alpha.root

    @property
    def exact(self) -> bool:
        return self.alpha.exact and all(f.exact for f in self.fs)


def shift_terms(inst: ShiftInstance) -> list[np.ndarray | None]:
    """Per-generation coefficients ``alpha_Q prod_i <f_i>_{Q^(m)}``."""
    prod = product_of_averages(inst.fs)
    terms = [None] * (inst.root.depth + 1)
    w = 2 ** inst.m
    for j in inst.alpha.support_levels():
        terms[j] = inst.alpha.levels[j] * sc.upsample(prod[j - inst.m], w)
    return terms


def eval_shift(inst: ShiftInstance) -> GridFunction:
    vals = push_to_leaves(shift_terms(inst), inst.root, inst.exact)
    signed = any(f.signed for f in inst.fs)
    return GridFunction(inst.root, vals, signed=signed)


def shift(alpha: CoefficientSequence, fs: Sequence[GridFunction], m: int = 0) -> GridFunction:
    return eval_shift(ShiftInstance(alpha, tuple(fs), m))


@dataclass(eq=False)
class SliceInstance:
    """One piece ``A^{m;0}_{P,alpha}`` of the slicing of a complexity-``m`` shift.

    ``alpha`` lives on the lattice ``D(P)`` and is supported on generations
    ``m, 2m, ...`` relative to ``P``; ``n`` is the generation of ``P``.
    """

    n: int
    cube: DyadicCube
    alpha: CoefficientSequence
    m: int
    lattice: RootCube

    def instance(self, fs: Sequence[GridFunction]) -> ShiftInstance:
        return ShiftInstance(self.alpha, tuple(f.restrict(self.cube) for f in fs), self.m)

    def evaluate(self, fs: Sequence[GridFunction]) -> GridFunction:
        """Value of the slice on the full lattice (zero outside ``P``)."""
        sub = eval_shift(self.instance(fs))
        return GridFunction(self.lattice, embed(self.lattice, self.cube, sub.values), sub.signed)


def slice_decompose(inst: ShiftInstance) -> list[SliceInstance]:
    """Split ``A^m`` (``m >= 1``) by generation residue ``n = level mod m`` and by
    the generation-``n`` ancestor ``P``."""
    m = inst.m
    if m < 1:
        raise ValueError("slicing needs m >= 1")
    root = inst.root
    out = []
    for n in range(min(m, root.depth + 1)):
        for cube in root.cubes(n):
            sub = inst.alpha.restrict(cube)
            sub = sub.keep_levels(lambda r: r >= m and r % m == 0)
            out.append(SliceInstance(n, cube, sub, m, root))
    return out


def eval_sparse_op(family, fs: Sequence[GridFunction]) -> GridFunction:
    """``sum_{Q in S} prod_i <f_i>_Q 1_Q``; ``family`` may also be a coefficient sequence."""
    exact = all(f.exact for f in fs)
    if isinstance(family, SparseFamily):
        family = indicator_sequence(family, exact=exact)
    return eval_shift(ShiftInstance(family, tuple(fs), 0))


def multilinear_maximal(fs: Sequence[GridFunction], cube: DyadicCube | None = None) -> GridFunction:
    """Dyadic ``M_P f = sup_{x in Q in D(P)} prod_i <|f_i|>_Q``, localized to ``P``.

    Returned on the lattice ``D(P)`` (``P = P0`` by default).
    """
    if cube is not None:
        fs = [f.restrict(cube) for f in fs]
    fs = [GridFunction(f.root, np.abs(f.values)) if f.signed else f for f in fs]
    prod = product_of_averages(fs)
    acc = prod[0]
    for j in range(1, len(prod)):
        up = sc.upsample(acc, 2)
        acc = np.maximum(up, prod[j]) if not sc.is_exact(up) else np.where(up >= prod[j], up, prod[j])
    return GridFunction(fs[0].root, acc)
