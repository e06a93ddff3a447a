"""Finite dyadic lattices, piecewise-constant grid functions and shifted grids.

A lattice is the set of dyadic subcubes of a root cube ``P0`` down to a fixed
finest generation ``depth``.  Cubes are addressed by ``(level, index)`` where
``index`` is a tuple of ``d`` integers in ``[0, 2**level)``.  Functions are
stored by their values on the finest generation (the *leaves*), as numpy arrays
of shape ``(2**depth,) * d``.

The module also implements the ``3**d`` shifted dyadic grids of the one-third
trick.  The level-``j`` cubes of the grid with shift ``rho`` are the base
level-``j`` cubes translated by ``(-1)**j * rho * 2**-j`` (in units of the root
side), for every integer ``j`` (negative levels are coarser than the root).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from . import _scalar as sc


class LevelUnderflow(ValueError):
    """Requested an ancestor above the root of the lattice."""


class CoverNotFound(RuntimeError):
    """No shifted grid provides the one-third cover (should never happen)."""


@dataclass(frozen=True)
class RootCube:
    """The root cube ``P0`` of a lattice truncated at generation ``depth``."""

    d: int
    side: Fraction = Fraction(1)
    corner: tuple = None
    depth: int = 0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be >= 1")
        if self.depth < 0:
            raise ValueError("depth must be >= 0")
        object.__setattr__(self, "side", sc.as_fraction(self.side))
        if self.side <= 0:
            raise ValueError("side length must be positive")
        corner = self.corner if self.corner is not None else (0,) * self.d
        if len(corner) != self.d:
            raise ValueError("corner must have d coordinates")
        object.__setattr__(self, "corner", tuple(sc.as_fraction(c) for c in corner))

    @property
    def leaf_shape(self) -> tuple:
        return (2 ** self.depth,) * self.d

    def level_shape(self, level: int) -> tuple:
        return (2 ** level,) * self.d

    @property
    def volume(self) -> Fraction:
        return self.side ** self.d

    def measure(self, level: int) -> Fraction:
        """Lebesgue measure of any cube of the given generation."""
        return self.volume / 2 ** (level * self.d)

    @property
    def leaf_measure(self) -> Fraction:
        return self.measure(self.depth)

    def n_cubes(self) -> int:
        return sum(2 ** (j * self.d) for j in range(self.depth + 1))

    def cubes(self, level: int) -> Iterator["DyadicCube"]:
        for idx in itertools.product(range(2 ** level), repeat=self.d):
            yield DyadicCube(level, idx)

    def all_cubes(self) -> Iterator["DyadicCube"]:
        for j in range(self.depth + 1):
            yield from self.cubes(j)

    @property
    def top(self) -> "DyadicCube":
        return DyadicCube(0, (0,) * self.d)

    def contains(self, cube: "DyadicCube") -> bool:
        return (
            len(cube.index) == self.d
            and 0 <= cube.level <= self.depth
            and all(0 <= k < 2 ** cube.level for k in cube.index)
        )

    def check(self, cube: "DyadicCube") -> None:
        if not self.contains(cube):
            raise ValueError(f"{cube} is not a cube of this lattice")

    def bounds(self, cube: "DyadicCube") -> list[tuple[Fraction, Fraction]]:
        """Per-axis half-open intervals ``[lo, hi)`` occupied by ``cube``."""
        s = self.side / 2 ** cube.level
        return [(c + k * s, c + (k + 1) * s) for c, k in zip(self.corner, cube.index)]

    def subroot(self, cube: "DyadicCube") -> "RootCube":
        """The lattice ``D(cube)`` truncated at the same finest generation."""
        self.check(cube)
        lo = [b[0] for b in self.bounds(cube)]
        return RootCube(self.d, self.side / 2 ** cube.level, tuple(lo), self.depth - cube.level)

    def leaf_slices(self, cube: "DyadicCube") -> tuple:
        """Index slices selecting the leaves under ``cube`` in a leaf array."""
        w = 2 ** (self.depth - cube.level)
        return tuple(slice(k * w, (k + 1) * w) for k in cube.index)


@dataclass(frozen=True, order=True)
class DyadicCube:
    """Address of a dyadic cube: generation ``level`` and integer multi-index."""

    level: int
    index: tuple

    def __post_init__(self):
        object.__setattr__(self, "index", tuple(int(k) for k in self.index))

    @property
    def d(self) -> int:
        return len(self.index)

    def parent(self, m: int = 1) -> "DyadicCube":
        return parent(self, m)

    def children(self) -> list["DyadicCube"]:
        return self.descendants(1)

    def descendants(self, m: int) -> list["DyadicCube"]:
        """The generation ``D_m(Q)``: all ``2**(m d)`` subcubes ``m`` levels down."""
        w = 2 ** m
        return [
            DyadicCube(self.level + m, tuple(k * w + o for k, o in zip(self.index, off)))
            for off in itertools.product(range(w), repeat=self.d)
        ]

    def contains(self, other: "DyadicCube") -> bool:
        """Whether ``other`` is a (not necessarily strict) subcube of ``self``."""
        if other.level < self.level:
            return False
        return parent(other, other.level - self.level) == self

    def relative_to(self, ancestor: "DyadicCube") -> "DyadicCube":
        """Address of ``self`` inside the lattice rooted at ``ancestor``."""
        if not ancestor.contains(self):
            raise ValueError(f"{self} is not inside {ancestor}")
        dl = self.level - ancestor.level
        w = 2 ** dl
        return DyadicCube(dl, tuple(k - a * w for k, a in zip(self.index, ancestor.index)))

    def lift(self, ancestor: "DyadicCube") -> "DyadicCube":
        """Inverse of :meth:`relative_to`: from ``D(ancestor)`` coordinates to global ones."""
        w = 2 ** self.level
        return DyadicCube(
            self.level + ancestor.level, tuple(a * w + k for k, a in zip(self.index, ancestor.index))
        )

    def __repr__(self) -> str:
        return f"DyadicCube({self.level}, {self.index})"


def parent(cube: DyadicCube, m: int) -> DyadicCube:
    """The ``m``-th dyadic parent ``Q^(m)``."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    if cube.level < m:
        raise LevelUnderflow(f"{cube} has no {m}-th parent inside the root")
    w = 2 ** m
    return DyadicCube(cube.level - m, tuple(k // w for k in cube.index))


@dataclass(eq=False)
class GridFunction:
    """Piecewise-constant function on the leaves of a lattice.

    Values are exact Fractions (object array) or floats.  Nonnegativity is
    enforced unless ``signed`` is set, which the Calderon-Zygmund bad parts need.
    """

    root: RootCube
    values: np.ndarray
    signed: bool = False

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.dtype != object:
            vals = vals.astype(float)
        elif not all(isinstance(v, Fraction) for v in vals.reshape(-1)):
            vals = sc.to_exact(vals)
        if vals.shape != self.root.leaf_shape:
            raise ValueError(f"values have shape {vals.shape}, expected {self.root.leaf_shape}")
        if not self.signed and vals.size and sc.array_max(-vals) > 0:
            raise ValueError("grid function must be nonnegative")
        self.values = vals

    @classmethod
    def constant(cls, root: RootCube, c, exact: bool = True) -> "GridFunction":
        return cls(root, sc.full(root.leaf_shape, c, exact))

    @classmethod
    def from_values(cls, root: RootCube, values, exact: bool = True, signed: bool = False):
        arr = np.asarray(values, dtype=object if exact else float)
        arr = arr.reshape(root.leaf_shape)
        return cls(root, sc.convert(arr, exact), signed=signed)

    @classmethod
    def indicator(cls, root: RootCube, cube: DyadicCube, c=1, exact: bool = True):
        vals = sc.zeros(root.leaf_shape, exact)
        vals[root.leaf_slices(cube)] = sc.const(c, exact)
        return cls(root, vals)

    @property
    def exact(self) -> bool:
        return sc.is_exact(self.values)

    def as_float(self) -> "GridFunction":
        return GridFunction(self.root, sc.to_float(self.values), self.signed)

    def as_exact(self) -> "GridFunction":
        return GridFunction(self.root, sc.to_exact(self.values), self.signed)

    @cached_property
    def averages(self) -> list[np.ndarray]:
        """``averages[j][index]`` is the mean of the function over cube ``(j, index)``."""
        out = [None] * (self.root.depth + 1)
        out[-1] = self.values
        for j in range(self.root.depth - 1, -1, -1):
            out[j] = sc.block_mean(out[j + 1])
        return out

    def average(self, cube: DyadicCube):
        return average(self, cube)

    def integral(self):
        total = self.values.sum()
        return total * sc.const(self.root.leaf_measure, self.exact)

    def power_integral(self, p: int):
        """``int |f|**p`` for integer ``p`` (exact in rational mode)."""
        vals = np.abs(self.values) if self.signed else self.values
        s = (vals ** p).sum() if vals.size else 0
        return s * sc.const(self.root.leaf_measure, self.exact)

    def lp_norm(self, p) -> float:
        vals = np.abs(sc.to_float(self.values))
        return float((vals ** float(p)).sum() * float(self.root.leaf_measure)) ** (1.0 / float(p))

    def restrict(self, cube: DyadicCube) -> "GridFunction":
        """The restriction to ``cube``, as a function on the lattice ``D(cube)``."""
        sub = self.root.subroot(cube)
        return GridFunction(sub, self.values[self.root.leaf_slices(cube)].copy(), self.signed)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        return GridFunction(self.root, self.values + other.values, self.signed or other.signed)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        return GridFunction(self.root, self.values - other.values, signed=True)

    def scaled(self, c) -> "GridFunction":
        return GridFunction(self.root, self.values * sc.const(c, self.exact), self.signed)


def average(f: GridFunction, cube: DyadicCube):
    """``(1/|Q|) int_Q f``, by summing the leaf values under ``cube``."""
    f.root.check(cube)
    block = f.values[f.root.leaf_slices(cube)]
    return block.sum() * sc.const(Fraction(1, block.size), f.exact)


def embed(root: RootCube, cube: DyadicCube, sub_values: np.ndarray) -> np.ndarray:
    """Place leaf values living on ``D(cube)`` into a zero leaf array of ``root``."""
    out = sc.zeros(root.leaf_shape, sc.is_exact(sub_values))
    out[root.leaf_slices(cube)] = sub_values
    return out


# ---------------------------------------------------------------------------
# shifted grids and the one-third cover


@dataclass(frozen=True, order=True)
class GridCube:
    """Cube of the shifted grid ``D^rho``; ``rho`` holds numerators of thirds.

    ``level`` may be negative (cubes larger than the root) and ``index`` ranges
    over all integers.  Ratios are in units of the root side, relative to the
    root corner.
    """

    rho: tuple
    level: int
    index: tuple

    def __post_init__(self):
        object.__setattr__(self, "rho", tuple(int(r) for r in self.rho))
        object.__setattr__(self, "index", tuple(int(k) for k in self.index))
        if any(r not in (0, 1, 2) for r in self.rho):
            raise ValueError("rho entries must be 0, 1 or 2 (thirds)")

    @property
    def side(self) -> Fraction:
        return Fraction(2) ** (-self.level)

    def offsets(self) -> list[Fraction]:
        sign = 1 if self.level % 2 == 0 else -1
        return [sign * Fraction(r, 3) for r in self.rho]

    def bounds(self) -> list[tuple[Fraction, Fraction]]:
        """Normalized per-axis intervals (root corner at 0, root side 1)."""
        s = self.side
        return [((k + o) * s, (k + 1 + o) * s) for k, o in zip(self.index, self.offsets())]

    def parent(self, m: int = 1) -> "GridCube":
        lo = [b[0] for b in self.bounds()]
        return grid_cell(self.rho, self.level - m, lo)

    def contains_box(self, box: Sequence[tuple[Fraction, Fraction]]) -> bool:
        return all(lo <= a and b <= hi for (lo, hi), (a, b) in zip(self.bounds(), box))


def grid_cell(rho: Sequence[int], level: int, point: Sequence[Fraction]) -> GridCube:
    """The cube of ``D^rho`` at ``level`` containing a normalized point."""
    scale = Fraction(2) ** level
    sign = 1 if level % 2 == 0 else -1
    idx = tuple(
        math.floor(Fraction(p) * scale - sign * Fraction(r, 3)) for p, r in zip(point, rho)
    )
    return GridCube(tuple(rho), level, idx)


def to_grid_cube(cube: DyadicCube) -> GridCube:
    """A base lattice cube viewed as a cube of the unshifted grid ``D^0``."""
    return GridCube((0,) * cube.d, cube.level, cube.index)


def normalized_box(cube: DyadicCube) -> list[tuple[Fraction, Fraction]]:
    s = Fraction(1, 2 ** cube.level)
    return [(k * s, (k + 1) * s) for k in cube.index]


def dilate(box, factor) -> list[tuple[Fraction, Fraction]]:
    """Cube with the same center and ``factor`` times the side length."""
    out = []
    for lo, hi in box:
        c = (lo + hi) / 2
        h = (hi - lo) * factor / 2
        out.append((c - h, c + h))
    return out


def one_third_cover(cube: DyadicCube, m: int) -> tuple[tuple, GridCube]:
    """Shift ``rho`` and ``R`` in ``D^rho`` with ``Q in R``, ``l(R) = 4 l(Q)``, ``2^m Q in R^(m)``.

    ``4 l(Q)`` is the only dyadic side length in ``(3 l(Q), 6 l(Q)]``.  Ties are
    broken by the lexicographically smallest ``rho`` (for fixed ``rho`` the
    candidate ``R`` is unique).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    box = normalized_box(cube)
    big = dilate(box, 2 ** m)
    corner = [b[0] for b in box]
    for rho in itertools.product(range(3), repeat=cube.d):
        r = grid_cell(rho, cube.level - 2, corner)
        if not r.contains_box(box):
            continue
        if r.parent(m).contains_box(big):
            return rho, r
    raise CoverNotFound(f"no shifted grid covers {cube} for m={m}")
