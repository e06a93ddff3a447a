"""JSON formats for lattices, sequences, families, instances and results.

Rationals are written as ``"p/q"`` strings so files round-trip exactly; floats
use ``repr``.  Output is deterministic (sorted keys, sorted cube lists).
"""
from __future__ import annotations

import json
from fractions import Fraction

import numpy as np

from . import _scalar as sc
from .carleson import CoefficientSequence, SparseFamily
from .cz_pipeline import WeightedFamily
from .dyadic import DyadicCube, GridCube, GridFunction, RootCube
from .shifts import ShiftInstance


class FormatError(ValueError):
    pass


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _mode(exact: bool) -> str:
    return "rational" if exact else "float"


def _exact_flag(mode: str) -> bool:
    if mode not in ("rational", "float"):
        raise FormatError(f"unknown arithmetic mode {mode!r}")
    return mode == "rational"


def cube_to_json(q) -> dict:
    out = {"level": q.level, "index": list(q.index)}
    if isinstance(q, GridCube):
        out["rho"] = list(q.rho)
    return out


def cube_from_json(obj) -> DyadicCube:
    return DyadicCube(int(obj["level"]), tuple(int(i) for i in obj["index"]))


def root_to_json(r: RootCube) -> dict:
    return {"d": r.d, "side": sc.fmt(r.side), "corner": [sc.fmt(c) for c in r.corner], "depth": r.depth}


def root_from_json(obj) -> RootCube:
    try:
        return RootCube(
            int(obj["d"]),
            sc.as_fraction(obj.get("side", "1")),
            tuple(sc.as_fraction(c) for c in obj.get("corner", [0] * int(obj["d"]))),
            int(obj["depth"]),
        )
    except KeyError as e:
        raise FormatError(f"root is missing field {e}") from None


def sequence_to_json(alpha: CoefficientSequence) -> dict:
    coeffs = [
        {"cube": cube_to_json(q), "value": sc.fmt(v)}
        for q, v in sorted(alpha.support(), key=lambda t: t[0])
    ]
    return {"root": root_to_json(alpha.root), "mode": _mode(alpha.exact), "coefficients": coeffs}


def sequence_from_json(obj, root: RootCube | None = None) -> CoefficientSequence:
    root = root or root_from_json(obj["root"])
    exact = _exact_flag(obj.get("mode", "rational"))
    mapping = {}
    for c in obj.get("coefficients", []):
        mapping[cube_from_json(c["cube"])] = sc.parse(c["value"], exact)
    return CoefficientSequence.from_mapping(root, mapping, exact)


def values_to_json(f: GridFunction) -> list:
    return [sc.fmt(v) for v in f.values.reshape(-1)]


def function_from_json(vals, root: RootCube, exact: bool) -> GridFunction:
    n = int(np.prod(root.leaf_shape))
    if len(vals) != n:
        raise FormatError(f"expected {n} leaf values, got {len(vals)}")
    parsed = [sc.parse(v, exact) for v in vals]
    return GridFunction.from_values(root, parsed, exact)


def family_to_json(fam: SparseFamily) -> dict:
    return {
        "root": root_to_json(fam.root),
        "eta": sc.fmt(fam.eta),
        "cubes": [cube_to_json(q) for q in sorted(fam.cubes)],
    }


def family_from_json(obj) -> SparseFamily:
    root = root_from_json(obj["root"])
    cubes = frozenset(cube_from_json(c) for c in obj.get("cubes", []))
    return SparseFamily(root, cubes, sc.as_fraction(obj.get("eta", "1/2")))


def instance_to_json(inst: ShiftInstance, seed=None) -> dict:
    out = {
        "root": root_to_json(inst.root),
        "m": inst.m,
        "k": inst.k,
        "mode": _mode(inst.exact),
        "alpha": sequence_to_json(inst.alpha)["coefficients"],
        "f": [values_to_json(f) for f in inst.fs],
    }
    if seed is not None:
        out["seed"] = seed
    return out


def instance_from_json(obj) -> ShiftInstance:
    try:
        root = root_from_json(obj["root"])
        exact = _exact_flag(obj.get("mode", "rational"))
        alpha = sequence_from_json({"coefficients": obj["alpha"], "mode": obj.get("mode", "rational")}, root)
        fs = tuple(function_from_json(v, root, exact) for v in obj["f"])
        m = int(obj.get("m", 0))
    except KeyError as e:
        raise FormatError(f"instance is missing field {e}") from None
    if "k" in obj and int(obj["k"]) != len(fs):
        raise FormatError(f"k={obj['k']} but {len(fs)} input functions given")
    return ShiftInstance(alpha, fs, m)


def _scalar_json(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (Fraction, int, np.integer, float, np.floating)):
        return sc.fmt(x)
    return x


def result_to_json(res) -> dict:
    """A :class:`DominationResult` with scalar stage summaries."""
    out = {
        "m": res.m,
        "k": res.k,
        "norm": sc.fmt(res.norm),
        "c_theory": sc.fmt(res.c_theory),
        "empirical_ratio": sc.fmt(res.empirical_ratio),
        "certified": bool(res.certified),
        "sparsity_pass": bool(res.sparsity_pass),
        "stages_ok": bool(res.stages_ok),
        "constants": res.constants,
        "sparsity": {"eta": sc.fmt(res.family.eta), "pass": bool(res.sparsity_pass)},
        "family": [cube_to_json(q) for q in sorted(res.family.cubes)],
    }
    stages = {}
    for key, val in res.stages.items():
        if isinstance(val, tuple):
            stages[key] = [_scalar_json(v) for v in val]
        elif isinstance(val, (bool, np.bool_, Fraction, int, float)):
            stages[key] = _scalar_json(val)
    if stages:
        out["stages"] = stages
    return out


def weighted_families_to_json(fams) -> list:
    return [
        {
            "rho": list(f.rho),
            "m": f.m,
            "weight": sc.fmt(f.weight),
            "family": [{"level": c.level, "index": list(c.index)} for c in sorted(f.cubes)],
        }
        for f in fams
    ]


def weighted_families_from_json(objs) -> list[WeightedFamily]:
    out = []
    for o in objs:
        rho = tuple(int(r) for r in o["rho"])
        cubes = frozenset(GridCube(rho, int(c["level"]), tuple(c["index"])) for c in o["family"])
        out.append(WeightedFamily(rho, int(o["m"]), sc.as_fraction(o["weight"]), cubes))
    return out


def load(path):
    with open(path) as fh:
        return json.load(fh)


def save(obj, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(obj))
