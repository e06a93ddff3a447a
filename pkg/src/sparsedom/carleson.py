"""Carleson sequences, sparse families and sparsity certificates."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Mapping

import numpy as np

from . import _scalar as sc
from .dyadic import DyadicCube, RootCube


class OverlappingRoots(ValueError):
    pass


def carleson_profile(levels: list[np.ndarray]) -> list[np.ndarray]:
    """``profile[j][P] = (1/|P|) sum_{Q in D(P)} alpha_Q |Q|`` for every lattice cube."""
    out = [None] * len(levels)
    out[-1] = levels[-1]
    for j in range(len(levels) - 2, -1, -1):
        out[j] = levels[j] + sc.block_mean(out[j + 1])
    return out


class CoefficientSequence:
    """Nonnegative coefficients ``alpha_Q`` on the cubes of a finite lattice.

    Stored densely, one array per generation.  The Carleson norm is computed at
    construction and cached.
    """

    def __init__(self, root: RootCube, levels: list[np.ndarray]):
        if len(levels) != root.depth + 1:
            raise ValueError("need one coefficient array per generation")
        exact = sc.is_exact(levels[0])
        fixed = []
        for j, arr in enumerate(levels):
            arr = sc.convert(arr, exact) if sc.is_exact(arr) != exact else np.asarray(arr)
            if arr.shape != root.level_shape(j):
                raise ValueError(f"level {j} has shape {arr.shape}, expected {root.level_shape(j)}")
            if arr.size and sc.array_max(-arr) > 0:
                raise ValueError("Carleson coefficients must be nonnegative")
            fixed.append(arr)
        self.root = root
        self.levels = fixed
        self.exact = exact
        self.profile = carleson_profile(fixed)
        self.norm = max(sc.array_max(p) for p in self.profile)

    @classmethod
    def zeros(cls, root: RootCube, exact: bool = True) -> "CoefficientSequence":
        return cls(root, [sc.zeros(root.level_shape(j), exact) for j in range(root.depth + 1)])

    @classmethod
    def from_mapping(cls, root: RootCube, mapping: Mapping[DyadicCube, object], exact: bool = True):
        levels = [sc.zeros(root.level_shape(j), exact) for j in range(root.depth + 1)]
        for cube, value in mapping.items():
            root.check(cube)
            levels[cube.level][cube.index] = sc.const(value, exact)
        return cls(root, levels)

    def __getitem__(self, cube: DyadicCube):
        self.root.check(cube)
        return self.levels[cube.level][cube.index]

    def support(self) -> Iterator[tuple[DyadicCube, object]]:
        for j, arr in enumerate(self.levels):
            for idx in zip(*np.nonzero(arr != 0)):
                yield DyadicCube(j, idx), arr[idx]

    def support_levels(self) -> list[int]:
        return [j for j, arr in enumerate(self.levels) if bool((arr != 0).any())]

    def is_zero(self) -> bool:
        return not self.support_levels()

    def scaled(self, c) -> "CoefficientSequence":
        c = sc.const(c, self.exact)
        return CoefficientSequence(self.root, [a * c for a in self.levels])

    def __add__(self, other: "CoefficientSequence") -> "CoefficientSequence":
        return CoefficientSequence(self.root, [a + b for a, b in zip(self.levels, other.levels)])

    def as_float(self) -> "CoefficientSequence":
        return CoefficientSequence(self.root, [sc.to_float(a) for a in self.levels])

    def keep_levels(self, keep) -> "CoefficientSequence":
        """Copy with every generation ``j`` for which ``keep(j)`` is false zeroed."""
        return CoefficientSequence(
            self.root,
            [a if keep(j) else sc.zeros(a.shape, self.exact) for j, a in enumerate(self.levels)],
        )

    def restrict(self, cube: DyadicCube) -> "CoefficientSequence":
        """The coefficients on ``D(cube)``, re-addressed relative to ``cube``."""
        sub = self.root.subroot(cube)
        levels = []
        for r in range(sub.depth + 1):
            w = 2 ** r
            sl = tuple(slice(k * w, (k + 1) * w) for k in cube.index)
            levels.append(self.levels[cube.level + r][sl].copy())
        return CoefficientSequence(sub, levels)

    def __repr__(self) -> str:
        n = sum(int((a != 0).sum()) for a in self.levels)
        return f"CoefficientSequence(d={self.root.d}, depth={self.root.depth}, support={n}, norm={self.norm})"


def carleson_norm(alpha: CoefficientSequence):
    """``sup_P (1/|P|) sum_{Q subset P} alpha_Q |Q|`` over the (finite) lattice."""
    return alpha.norm


@dataclass(frozen=True)
class SparseFamily:
    root: RootCube
    cubes: frozenset
    eta: Fraction = Fraction(1, 2)

    def __post_init__(self):
        object.__setattr__(self, "cubes", frozenset(self.cubes))
        object.__setattr__(self, "eta", sc.as_fraction(self.eta))
        for q in self.cubes:
            self.root.check(q)

    def __len__(self) -> int:
        return len(self.cubes)

    def __iter__(self):
        return iter(sorted(self.cubes))

    def __contains__(self, cube) -> bool:
        return cube in self.cubes

    def masks(self) -> list[np.ndarray]:
        out = [np.zeros(self.root.level_shape(j), dtype=bool) for j in range(self.root.depth + 1)]
        for q in self.cubes:
            out[q.level][q.index] = True
        return out


@dataclass
class CanonicalCertificate:
    passed: bool
    eta: Fraction
    # |E(Q)|/|Q| for every cube of the family
    witness_fraction: dict
    worst_cube: DyadicCube | None
    family: SparseFamily

    def witnesses(self) -> dict:
        """``E(Q)`` for each ``Q`` as an array of leaf multi-indices.

        A leaf belongs to ``E(Q)`` when ``Q`` is the smallest family cube
        containing it, so the witnesses are pairwise disjoint by construction.
        """
        root = self.family.root
        masks = self.family.masks()
        owner = np.full(root.leaf_shape, -1, dtype=int)
        for j, mask in enumerate(masks):
            owner[sc.upsample(mask, 2 ** (root.depth - j))] = j
        out = {}
        for q in self.family.cubes:
            region = np.zeros(root.leaf_shape, dtype=bool)
            region[root.leaf_slices(q)] = True
            out[q] = np.argwhere(region & (owner == q.level))
        return out


def check_sparse_canonical(family: SparseFamily, eta=None) -> CanonicalCertificate:
    """Test ``|Q \\ F(Q)| >= eta |Q|`` where ``F(Q)`` is the union of the maximal
    family cubes strictly inside ``Q``."""
    eta = family.eta if eta is None else sc.as_fraction(eta)
    root = family.root
    masks = family.masks()
    # covered[j][Q]: number of leaves of Q lying in family cubes contained in Q
    covered = [None] * (root.depth + 1)
    strict = [None] * (root.depth + 1)
    for j in range(root.depth, -1, -1):
        full = 2 ** (root.d * (root.depth - j))
        if j < root.depth:
            strict[j] = sc.block_sum(covered[j + 1])
        else:
            strict[j] = np.zeros(masks[j].shape, dtype=np.int64)
        covered[j] = np.where(masks[j], full, strict[j])
    fractions = {}
    for q in family.cubes:
        full = 2 ** (root.d * (root.depth - q.level))
        fractions[q] = Fraction(full - int(strict[q.level][q.index]), full)
    worst = min(fractions, key=lambda q: (fractions[q], q)) if fractions else None
    passed = all(v >= eta for v in fractions.values())
    return CanonicalCertificate(passed, eta, fractions, worst, family)


@dataclass
class PackingReport:
    passed: bool
    eta: Fraction
    packing_constant: Fraction
    worst_cube: DyadicCube | None


def check_sparse_packing(family: SparseFamily, eta=None) -> PackingReport:
    """Test ``sum_{Q' in S, Q' subset Q} |Q'| <= |Q| / eta`` for every ``Q`` in the family."""
    eta = family.eta if eta is None else sc.as_fraction(eta)
    profile = carleson_profile([sc.convert(m.astype(int), True) for m in family.masks()])
    worst, const = None, Fraction(0)
    for q in sorted(family.cubes):
        v = profile[q.level][q.index]
        if v > const:
            worst, const = q, v
    return PackingReport(const <= 1 / eta, eta, const, worst)


def indicator_sequence(family: SparseFamily, weight=1, exact: bool = True) -> CoefficientSequence:
    root = family.root
    levels = [sc.zeros(root.level_shape(j), exact) for j in range(root.depth + 1)]
    w = sc.const(weight, exact)
    for q in family.cubes:
        levels[q.level][q.index] = w
    return CoefficientSequence(root, levels)


def union_rooted(families: Mapping[DyadicCube, SparseFamily]) -> SparseFamily:
    """Union of families living in pairwise disjoint cubes of one generation."""
    if not families:
        raise ValueError("need at least one family")
    roots = sorted(families)
    lattice = families[roots[0]].root
    for i, a in enumerate(roots):
        for b in roots[i + 1:]:
            if a.contains(b) or b.contains(a):
                raise OverlappingRoots(f"roots {a} and {b} overlap")
    cubes = set()
    for r in roots:
        fam = families[r]
        if fam.root != lattice:
            raise ValueError("families must share a lattice")
        for q in fam.cubes:
            if not r.contains(q):
                raise ValueError(f"{q} lies outside its root {r}")
        cubes |= fam.cubes
    return SparseFamily(lattice, frozenset(cubes), min(families[r].eta for r in roots))


def lift_family(family: SparseFamily, ancestor: DyadicCube, lattice: RootCube) -> SparseFamily:
    """Re-address a family on ``D(ancestor)`` as a family of the full lattice."""
    return SparseFamily(lattice, frozenset(q.lift(ancestor) for q in family.cubes), family.eta)


def family_from_cubes(root: RootCube, cubes: Iterable[DyadicCube], eta=Fraction(1, 2)) -> SparseFamily:
    return SparseFamily(root, frozenset(cubes), eta)
