"""Seeded random instances for the experiments and tests."""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from . import _scalar as sc
from .carleson import CoefficientSequence
from .dyadic import GridFunction, RootCube
from .shifts import ShiftInstance

VALUE_DENOM = 2 ** 10
MAX_LEAF_VALUE = 2 ** 10


def trial_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent stream per ``(seed, key...)``; stable across runs and job counts."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, key)]))


def admissible_levels(depth: int, m: int) -> list[int]:
    """Levels that may carry coefficients: ``>= m``, and for ``m = 0`` not the finest one."""
    if m == 0:
        return list(range(0, depth))
    return list(range(m, depth + 1))


def random_alpha(rng, root: RootCube, m: int, density=None, sparse: bool = False, exact: bool = True):
    """Coefficients ``n/1024`` with ``1 <= n <= 1024`` on a random set of admissible cubes."""
    levels = [np.zeros(root.level_shape(j), dtype=np.int64) for j in range(root.depth + 1)]
    adm = admissible_levels(root.depth, m)
    if adm:
        if density is None:
            density = float(rng.uniform(0.05, 0.3)) if sparse else float(rng.uniform(0.2, 1.0))
        for j in adm:
            mask = rng.random(root.level_shape(j)) < density
            levels[j] = np.where(mask, rng.integers(1, VALUE_DENOM + 1, size=root.level_shape(j)), 0)
    arrs = []
    for a in levels:
        out = sc.zeros(a.shape, exact)
        flat = out.reshape(-1)
        for i, n in enumerate(a.reshape(-1)):
            if n:
                flat[i] = sc.const(Fraction(int(n), VALUE_DENOM), exact)
        arrs.append(out)
    return CoefficientSequence(root, arrs)


def random_function(
    rng, root: RootCube, spiky: bool = False, exact: bool = True, atoms: int | None = None
) -> GridFunction:
    """Leaf values ``n / 2**s`` in ``[0, 1024]``; ``spiky`` concentrates mass on few leaves.

    ``atoms`` keeps exactly that many nonzero leaves (values ``1..1024``), which
    makes averages grow fast towards the atoms and forces nested selections.
    """
    n = int(np.prod(root.leaf_shape))
    num = rng.integers(0, MAX_LEAF_VALUE + 1, size=n)
    if atoms is not None:
        keep = np.zeros(n, dtype=bool)
        keep[rng.choice(n, size=min(atoms, n), replace=False)] = True
        num = np.where(keep, rng.integers(1, MAX_LEAF_VALUE + 1, size=n), 0)
    elif spiky:
        keep = rng.random(n) < max(1.0 / n, 0.1)
        if not keep.any():
            keep[int(rng.integers(0, n))] = True
        num = np.where(keep, num, 0)
    shifts = rng.integers(0, 4, size=n)
    vals = [Fraction(int(a), 2 ** int(s)) for a, s in zip(num, shifts)]
    return GridFunction.from_values(root, vals, exact)


def random_instance(
    seed: int,
    d: int,
    k: int,
    m: int,
    depth: int,
    *key: int,
    exact: bool = True,
    normalize: bool = False,
    sparse: bool = False,
    spiky: bool = False,
    atoms: int | None = None,
) -> ShiftInstance:
    rng = trial_rng(seed, d, k, m, depth, *key)
    root = RootCube(d, depth=depth)
    alpha = random_alpha(rng, root, m, sparse=sparse, exact=exact)
    if normalize and not alpha.is_zero():
        alpha = alpha.scaled(1 / alpha.norm)
    fs = tuple(random_function(rng, root, spiky, exact, atoms) for _ in range(k))
    return ShiftInstance(alpha, fs, m)


def slice_shaped(inst: ShiftInstance) -> ShiftInstance:
    """Keep only the generations ``m, 2m, ...`` (the shape of a single slice)."""
    m = inst.m
    alpha = inst.alpha.keep_levels(lambda j: j >= m and j % m == 0)
    return ShiftInstance(alpha, inst.fs, m)
