"""Hypothesis strategies for small exact lattices."""
from fractions import Fraction

import numpy as np
from hypothesis import strategies as st

from sparsedom import CoefficientSequence, GridFunction, RootCube, ShiftInstance
from sparsedom.instances import admissible_levels

small_rationals = st.builds(Fraction, st.integers(0, 64), st.sampled_from([1, 2, 4, 8]))


@st.composite
def roots(draw, max_d=2, max_leaf_exp=6):
    d = draw(st.integers(1, max_d))
    depth = draw(st.integers(0, max_leaf_exp // d))
    return RootCube(d, depth=depth)


@st.composite
def functions(draw, root, values=small_rationals):
    n = int(np.prod(root.leaf_shape))
    vals = draw(st.lists(values, min_size=n, max_size=n))
    return GridFunction.from_values(root, vals)


@st.composite
def sequences(draw, root, levels=None, values=small_rationals):
    levels = range(root.depth + 1) if levels is None else levels
    arrs = []
    for j in range(root.depth + 1):
        n = 2 ** (j * root.d)
        if j in levels:
            vals = draw(st.lists(values, min_size=n, max_size=n))
        else:
            vals = [Fraction(0)] * n
        arr = np.empty(n, dtype=object)
        arr[:] = vals
        arrs.append(arr.reshape(root.level_shape(j)))
    return CoefficientSequence(root, arrs)


@st.composite
def instances(draw, max_d=2, max_k=2, max_m=3, max_leaf_exp=6, slice_shape=False):
    d = draw(st.integers(1, max_d))
    depth = draw(st.integers(1, max(1, max_leaf_exp // d)))
    m = draw(st.integers(0, min(max_m, depth)))
    if slice_shape:
        m = max(m, 1)
        levels = [j for j in range(m, depth + 1) if j % m == 0]
    else:
        levels = admissible_levels(depth, m)
    root = RootCube(d, depth=depth)
    k = draw(st.integers(1, max_k))
    alpha = draw(sequences(root, levels))
    fs = tuple(draw(functions(root)) for _ in range(k))
    return ShiftInstance(alpha, fs, m)


@st.composite
def families(draw, root):
    cubes = list(root.all_cubes())
    picks = draw(st.lists(st.sampled_from(cubes), max_size=min(12, len(cubes)), unique=True))
    return frozenset(picks)
