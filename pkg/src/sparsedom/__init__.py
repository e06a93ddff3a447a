"""Exact sparse domination of positive multilinear dyadic shifts.

Everything runs on finite dyadic lattices in exact rational arithmetic (or
float64 on request), so each inequality is checked leaf by leaf rather than
sampled.
"""
from .carleson import (
    CanonicalCertificate,
    CoefficientSequence,
    OverlappingRoots,
    PackingReport,
    SparseFamily,
    carleson_norm,
    check_sparse_canonical,
    check_sparse_packing,
    indicator_sequence,
    union_rooted,
)
from .cz_pipeline import (
    DivergenceWarning,
    GridMismatch,
    ModulusOfContinuity,
    WeightedFamily,
    assemble_domination,
    log_dini_series,
    regroup_families,
)
from .domination import (
    DominationResult,
    NotNormalized,
    SupportResidueError,
    c1_constant,
    c2_constant,
    dominate_full,
    dominate_m0,
    dominate_slice,
    run_selection,
    selection_threshold,
    verify_beta_bound,
    weak_type_constant,
)
from .dyadic import (
    CoverNotFound,
    DyadicCube,
    GridCube,
    GridFunction,
    LevelUnderflow,
    RootCube,
    average,
    one_third_cover,
    parent,
)
from .shifts import (
    ShiftInstance,
    SupportLevelError,
    eval_shift,
    eval_sparse_op,
    multilinear_maximal,
    slice_decompose,
)
from .weak_type import (
    CZDecomposition,
    ExponentError,
    averaged_sequence,
    carleson_embedding_check,
    cz_decompose,
    l2_bound_check,
    vanishing_check,
    weak_type_functional,
)
from .weights import WeightVector, a_p_constant, sparse_weighted_check

__version__ = "0.1.0"
