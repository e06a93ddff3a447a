"""Deep unit chains toward one atom: where the printed C_1 is too small."""
from fractions import Fraction

import pytest

import oracles
from conftest import alpha_dict, leaf_dict
from deep_chains import chain_instance, chain_instance_m0
from sparsedom import c1_constant, dominate_full, dominate_m0, selection_threshold
from sparsedom.carleson import check_sparse_canonical
from sparsedom.domination import slice_constant


def oracle_ratio(inst, family):
    d, J = inst.root.d, inst.root.depth
    fs = [leaf_dict(f) for f in inst.fs]
    lhs = oracles.shift(alpha_dict(inst.alpha), fs, inst.m, d, J)
    rhs = oracles.sparse_op({(q.level, q.index) for q in family.cubes}, fs, d, J)
    assert all(rhs[x] or not lhs[x] for x in lhs)
    return max(lhs[x] / rhs[x] for x in lhs if rhs[x])


def test_slice_constant_modes():
    assert slice_constant(1, 1) == c1_constant(1, 1) == 512
    assert slice_constant(1, 1, "derived") == selection_threshold(1, 1) == 1024
    assert selection_threshold(2, 1) == 4 * c1_constant(2, 1)
    with pytest.raises(ValueError):
        slice_constant(1, 1, "loose")


def test_m0_chain_exceeds_printed_c1():
    inst = chain_instance_m0(1, 12, 0)
    res = dominate_m0(inst.alpha, inst.fs)
    ratio = oracle_ratio(inst, res.family)
    assert ratio == res.empirical_ratio
    assert inst.alpha.norm == oracles.carleson_norm(alpha_dict(inst.alpha), 1, 12)
    assert ratio > c1_constant(1, 1) * inst.alpha.norm
    assert ratio <= selection_threshold(1, 1) * inst.alpha.norm
    assert not res.certified and res.stages_ok


def test_m0_chain_certified_with_derived_constants():
    inst = chain_instance_m0(1, 12, 0)
    res = dominate_m0(inst.alpha, inst.fs, "derived")
    beta_norm = res.stages["relabel_norms"][1]
    assert res.c_theory == 1024 * beta_norm
    assert res.certified and res.stages_ok and res.sparsity_pass
    assert res.constants == "derived"


def test_m0_chain_d2_meets_printed_c1_exactly():
    inst = chain_instance_m0(2, 6, 0)
    res = dominate_m0(inst.alpha, inst.fs)
    assert res.empirical_ratio == c1_constant(1, 2) * inst.alpha.norm
    assert res.certified


@pytest.mark.parametrize("d,J,m", [(1, 11, 1), (1, 12, 2)])
def test_chain_slices_exceed_printed_c1_but_not_t(d, J, m):
    inst = chain_instance(d, J, m, 0)
    res = dominate_full(inst.alpha, inst.fs, m)
    # the end-to-end constant 2 C_1^2 m ||alpha|| still has room
    assert res.certified and not res.stages_ok
    slices = [r for _, _, r in res.stages["slices"]]
    assert any(not r.certified for r in slices)
    T = selection_threshold(1, d)
    assert all(r.empirical_ratio <= T * r.norm for r in slices)
    derived = dominate_full(inst.alpha, inst.fs, m, "derived")
    assert derived.certified and derived.stages_ok and derived.sparsity_pass


@pytest.mark.parametrize("d,J", [(1, 12), (2, 7)])
def test_chain_selection_nests_and_stays_sparse(d, J):
    inst = chain_instance(d, J, 1, 0)
    res = dominate_full(inst.alpha, inst.fs, 1)
    fams = [r.family for _, _, r in res.stages["slices"]] + [res.family]
    nested = [
        (p, q) for fam in fams for p in fam.cubes for q in fam.cubes
        if q.level > p.level and p.contains(q)
    ]
    assert nested
    assert all(check_sparse_canonical(f, Fraction(1, 2)).passed for f in fams)
    assert res.certified and res.stages_ok
