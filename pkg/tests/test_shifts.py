from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import alpha_dict, leaf_dict
from sparsedom import (
    CoefficientSequence,
    DyadicCube,
    GridFunction,
    RootCube,
    ShiftInstance,
    SparseFamily,
    SupportLevelError,
    eval_shift,
    eval_sparse_op,
    multilinear_maximal,
    slice_decompose,
)
from sparsedom.weak_type import weak_type_value
from strategies import functions, instances, roots

P0 = DyadicCube(0, (0,))


def values(g):
    return list(g.values.reshape(-1))


def test_eval_shift_examples():
    r = RootCube(1, depth=2)
    one = GridFunction.constant(r, 1)
    a0 = CoefficientSequence.from_mapping(r, {P0: 1})
    assert values(eval_shift(ShiftInstance(a0, (one,), 0))) == [1] * 4
    a1 = CoefficientSequence.from_mapping(r, {DyadicCube(1, (0,)): 1, DyadicCube(1, (1,)): 1})
    half = GridFunction.indicator(r, DyadicCube(1, (0,)))
    assert values(eval_shift(ShiftInstance(a1, (half,), 1))) == [Fraction(1, 2)] * 4
    zero = GridFunction.constant(r, 0)
    assert values(eval_shift(ShiftInstance(a0, (one, zero), 0))) == [0] * 4


def test_support_below_m_rejected():
    r = RootCube(1, depth=2)
    a = CoefficientSequence.from_mapping(r, {DyadicCube(1, (0,)): 1})
    with pytest.raises(SupportLevelError):
        ShiftInstance(a, (GridFunction.constant(r, 1),), 2)


@settings(max_examples=60, deadline=None)
@given(instances(max_leaf_exp=4))
def test_eval_shift_matches_oracle(inst):
    got = leaf_dict(eval_shift(inst))
    ref = oracles.shift(alpha_dict(inst.alpha), [leaf_dict(f) for f in inst.fs], inst.m, inst.root.d, inst.root.depth)
    assert got == ref


@settings(max_examples=40, deadline=None)
@given(instances(max_leaf_exp=5), st.data())
def test_shift_linear_and_monotone(inst, data):
    slot = data.draw(st.integers(0, inst.k - 1))
    h = data.draw(functions(inst.root))
    base = eval_shift(inst).values
    fs = list(inst.fs)
    fs[slot] = inst.fs[slot] + h
    plus = eval_shift(ShiftInstance(inst.alpha, tuple(fs), inst.m)).values
    fs[slot] = h
    only_h = eval_shift(ShiftInstance(inst.alpha, tuple(fs), inst.m)).values
    assert (plus == base + only_h).all()
    assert (plus >= base).all()


def test_float_mode_agrees():
    r = RootCube(2, depth=3)
    rng = np.random.default_rng(1)
    a = CoefficientSequence.from_mapping(
        r, {q: Fraction(int(rng.integers(0, 4)), 4) for j in (1, 2, 3) for q in r.cubes(j)})
    f = GridFunction.from_values(r, [Fraction(int(v), 3) for v in rng.integers(0, 9, size=64)])
    exact = eval_shift(ShiftInstance(a, (f,), 1)).values
    fl = eval_shift(ShiftInstance(a.as_float(), (f.as_float(),), 1)).values
    assert np.allclose(fl, exact.astype(float), rtol=1e-12)


def test_slice_examples():
    r = RootCube(1, depth=3)
    a = CoefficientSequence.from_mapping(r, {q: 1 for j in (2, 3) for q in r.cubes(j)})
    inst = ShiftInstance(a, (GridFunction.constant(r, 1),), 2)
    parts = slice_decompose(inst)
    owners = {}
    for sl in parts:
        for q, _ in sl.alpha.support():
            owners[q.lift(sl.cube)] = (sl.n, sl.cube)
    for q in r.cubes(2):
        assert owners[q] == (0, P0)
    for q in r.cubes(3):
        assert owners[q] == (1, q.parent(2))
    one = ShiftInstance(a.keep_levels(lambda j: j >= 1), (GridFunction.constant(r, 1),), 1)
    parts = slice_decompose(one)
    assert len(parts) == 1 and parts[0].cube == P0


@settings(max_examples=60, deadline=None)
@given(instances(max_leaf_exp=6))
def test_slice_reassembly_exact(inst):
    if inst.m == 0:
        return
    total = sum(sl.evaluate(inst.fs).values for sl in slice_decompose(inst))
    assert (total == eval_shift(inst).values).all()


def test_sparse_op_examples():
    r = RootCube(1, depth=1)
    c = GridFunction.constant(r, 5)
    assert values(eval_sparse_op(SparseFamily(r, {P0}), [c])) == [5, 5]
    one = GridFunction.constant(r, 1)
    fam = SparseFamily(r, {P0, DyadicCube(1, (0,))})
    assert values(eval_sparse_op(fam, [one])) == [2, 1]
    half = GridFunction.indicator(r, DyadicCube(1, (0,)))
    assert values(eval_sparse_op(SparseFamily(r, {P0}), [half, half])) == [Fraction(1, 4)] * 2


def test_maximal_examples():
    r = RootCube(1, depth=1)
    assert values(multilinear_maximal([GridFunction.constant(r, 3)])) == [3, 3]
    f = GridFunction.from_values(r, [2, 0])
    assert values(multilinear_maximal([f])) == [2, 1]
    assert values(multilinear_maximal([f, f])) == [4, 1]


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_maximal_matches_oracle_and_weak_type(data):
    root = data.draw(roots(max_leaf_exp=4))
    k = data.draw(st.integers(1, 2))
    fs = [data.draw(functions(root)) for _ in range(k)]
    mx = multilinear_maximal(fs)
    assert leaf_dict(mx) == oracles.maximal([leaf_dict(f) for f in fs], root.d, root.depth)
    value, _ = weak_type_value(mx, k)
    bound = Fraction(1)
    for f in fs:
        bound *= f.integral()
    assert value <= bound


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_disjoint_family_below_maximal(data):
    # coefficients <= 1 on pairwise disjoint cubes are dominated by the maximal function
    root = data.draw(roots(max_leaf_exp=4))
    fs = [data.draw(functions(root)) for _ in range(data.draw(st.integers(1, 2)))]
    chosen = {}
    free = np.ones(root.leaf_shape, dtype=bool)
    for q in data.draw(st.permutations(list(root.all_cubes()))):
        sl = root.leaf_slices(q)
        if free[sl].all() and data.draw(st.booleans()):
            chosen[q] = data.draw(st.fractions(0, 1))
            free[sl] = False
    a = CoefficientSequence.from_mapping(root, chosen)
    g = eval_shift(ShiftInstance(a, tuple(fs), 0)).values
    assert (g <= multilinear_maximal(fs).values).all()


def test_multilinear_maximal_localized():
    r = RootCube(1, depth=2)
    f = GridFunction.from_values(r, [4, 0, 0, 0])
    loc = multilinear_maximal([f], DyadicCube(1, (1,)))
    assert values(loc) == [0, 0]
