"""Command-line experiment runner.

Subcommands write CSV summaries and per-trial JSON certificates into the output
directory (``--out``, else ``$SPARSEDOM_OUTPUT_DIR``, else ``./sparsedom-out``).
The exit status is 0 iff every certified inequality of the run passed.
"""
from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

from . import _scalar as sc
from . import serialization as ser
from .carleson import check_sparse_canonical, check_sparse_packing
from .cz_pipeline import assemble_domination, regroup_families, regroup_identity
from .domination import dominate_full
from .dyadic import RootCube
from .shifts import ShiftInstance
from .instances import random_function, random_instance, trial_rng
from .weak_type import l2_bound_check, weak_type_functional
from .weights import (
    WeightVector,
    a_p_constant,
    corner_chain,
    loglog_slope,
    monotone_ensemble,
    random_weight,
    slope_bound,
    sparse_weighted_check,
)

OUTPUT_ENV = "SPARSEDOM_OUTPUT_DIR"
MAX_LEAF_EXPONENT = 20

DOMINATE_HEADER = ["trial", "m", "k", "d", "J", "seed", "norm", "c_theory", "empirical_ratio",
                   "ratio_per_complexity", "family_size", "certified", "sparse", "stages"]
WEAK_HEADER = ["m", "k", "d", "J", "seed", "value", "bound", "pass"]
L2_HEADER = ["m", "k", "d", "J", "seed", "lhs", "rhs", "pass"]
WEIGHTS_HEADER = ["seed", "k", "p_i", "a_p", "lhs", "rhs_core", "ratio"]


class ConfigError(ValueError):
    pass


def parse_m(text: str) -> list[int]:
    """``"3"`` or an inclusive range ``"0..4"``."""
    try:
        if ".." in text:
            a, b = text.split("..")
            lo, hi = int(a), int(b)
        else:
            lo = hi = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"m must be an integer or a range a..b, got {text!r}") from None
    if lo < 0 or hi < lo:
        raise argparse.ArgumentTypeError(f"bad m range {text!r}")
    return list(range(lo, hi + 1))


def output_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUTPUT_ENV) or "sparsedom-out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def validate(args) -> None:
    if getattr(args, "trials", 1) < 1:
        raise ConfigError("--trials must be >= 1")
    d, depth = getattr(args, "d", 1), getattr(args, "depth", 0)
    if d < 1:
        raise ConfigError("--d must be >= 1")
    if depth < 0:
        raise ConfigError("--depth must be >= 0")
    if d * depth > MAX_LEAF_EXPONENT:
        raise ConfigError(
            f"2^(depth*d) = 2^{d * depth} leaves exceeds the desk-scale limit 2^{MAX_LEAF_EXPONENT}; "
            "lower --depth or --d"
        )
    if getattr(args, "k", 1) < 1:
        raise ConfigError("--k must be >= 1")
    ms = getattr(args, "m", None)
    if ms and max(ms) > depth and not getattr(args, "inp", None):
        raise ConfigError(f"--m {max(ms)} exceeds --depth {depth}; such a shift has no admissible cubes")


def write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue())


def _run_parallel(fn, tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, tasks))


def _instances(args):
    """``(trial index, m, instance)`` either from ``--in`` or generated."""
    exact = args.mode == "rational"
    if args.inp:
        inst = ser.instance_from_json(ser.load(args.inp))
        if not exact and inst.exact:
            inst = type(inst)(inst.alpha.as_float(), tuple(f.as_float() for f in inst.fs), inst.m)
        return [(0, inst.m, inst)]
    out = []
    t = 0
    # matched: one instance per trial, admissible for every m of the range
    matched = getattr(args, "matched", False)
    for m in args.m:
        gen_m = max(args.m) if matched else m
        for trial in range(args.trials):
            out.append((t, m, (args.seed, args.d, args.k, gen_m, m, args.depth, trial, exact, args.normalize)))
            t += 1
    return out


def _materialize(spec):
    if not isinstance(spec, tuple):
        return spec
    seed, d, k, gen_m, m, depth, trial, exact, normalize = spec
    inst = random_instance(seed, d, k, gen_m, depth, trial, exact=exact, normalize=normalize)
    return inst if gen_m == m else ShiftInstance(inst.alpha, inst.fs, m)


def _dominate_task(task):
    t, m, spec, constants = task
    inst = _materialize(spec)
    res = dominate_full(inst.alpha, inst.fs, m, constants)
    return t, m, inst, res


def cmd_dominate(args) -> int:
    validate(args)
    out = output_dir(args)
    jdir = out / "dominate"
    jdir.mkdir(exist_ok=True)
    tasks = [(t, m, spec, args.constants) for t, m, spec in _instances(args)]
    results = _run_parallel(_dominate_task, tasks, args.jobs)
    rows, ok = [], True
    for t, m, inst, res in sorted(results, key=lambda r: r[0]):
        good = bool(res.certified and res.sparsity_pass and res.stages_ok)
        ok &= good
        obj = ser.result_to_json(res)
        obj["trial"] = t
        ser.save(obj, jdir / f"trial_{t:04d}.json")
        rows.append([
            t, m, inst.k, inst.root.d, inst.root.depth, args.seed, sc.fmt(res.norm), sc.fmt(res.c_theory),
            sc.fmt(res.empirical_ratio), sc.fmt(res.ratio_per_complexity), len(res.family),
            int(bool(res.certified)), int(bool(res.sparsity_pass)), int(bool(res.stages_ok)),
        ])
    write_csv(out / "dominate.csv", DOMINATE_HEADER, rows)
    print(f"dominate: {len(rows)} trials, {'all certified' if ok else 'CERTIFICATION FAILED'}")
    return 0 if ok else 1


def _weak_task(task):
    t, m, spec = task
    inst = _materialize(spec)
    return t, m, inst, weak_type_functional(inst), l2_bound_check(inst)


def cmd_weak_type(args) -> int:
    validate(args)
    out = output_dir(args)
    results = _run_parallel(_weak_task, _instances(args), args.jobs)
    rows, l2rows, ok = [], [], True
    worst = Fraction(0)
    for t, m, inst, wt, l2 in sorted(results, key=lambda r: r[0]):
        ok &= wt.passed and l2.passed
        r = inst.root
        rows.append([m, inst.k, r.d, r.depth, args.seed, sc.fmt(wt.value), sc.fmt(wt.bound), int(wt.passed)])
        l2rows.append([m, inst.k, r.d, r.depth, args.seed, repr(float(l2.lhs)), repr(float(l2.rhs)), int(l2.passed)])
        if wt.bound:
            worst = max(worst, sc.as_fraction(wt.value) / sc.as_fraction(wt.bound)) if inst.exact else max(
                float(worst), float(wt.value) / float(wt.bound))
    write_csv(out / "weak_type.csv", WEAK_HEADER, rows)
    write_csv(out / "weak_type_l2.csv", L2_HEADER, l2rows)
    ser.save({"trials": len(rows), "max_value_over_bound": sc.fmt(worst), "all_pass": bool(ok)},
             out / "weak_type_summary.json")
    print(f"weak-type: {len(rows)} trials, max value/bound {float(worst):.3e}, {'pass' if ok else 'FAIL'}")
    return 0 if ok else 1


def cmd_carleson(args) -> int:
    if not args.inp:
        raise ConfigError("carleson needs --in with a family (--check-sparse) or a sequence file")
    obj = ser.load(args.inp)
    if args.check_sparse:
        fam = ser.family_from_json(obj)
        eta = sc.as_fraction(args.eta) if args.eta else fam.eta
        can = check_sparse_canonical(fam, eta)
        pack = check_sparse_packing(fam, eta)
        report = {
            "cubes": len(fam),
            "eta": sc.fmt(eta),
            "canonical_pass": bool(can.passed),
            "worst_cube": ser.cube_to_json(can.worst_cube) if can.worst_cube else None,
            "worst_fraction": sc.fmt(can.witness_fraction[can.worst_cube]) if can.worst_cube else None,
            "packing_pass": bool(pack.passed),
            "packing_constant": sc.fmt(pack.packing_constant),
        }
        ok = can.passed and pack.passed
    else:
        alpha = ser.sequence_from_json(obj)
        report = {"norm": sc.fmt(alpha.norm), "support": sum(1 for _ in alpha.support())}
        ok = True
    text = ser.dumps(report)
    if args.out:
        out = output_dir(args)
        (out / "carleson.json").write_text(text)
    sys.stdout.write(text)
    return 0 if ok else 1


def cmd_weights(args) -> int:
    validate(args)
    out = output_dir(args)
    ps = [sc.as_fraction(p) for p in args.p] if args.p else [Fraction(2)] * args.k
    if len(ps) != args.k:
        raise ConfigError(f"--p needs {args.k} exponents")
    root = RootCube(args.d, depth=args.depth)
    fam = corner_chain(root)
    rows, ok = [], True
    for trial in range(args.trials):
        rng = trial_rng(args.seed, trial)
        wv = WeightVector(tuple(random_weight(rng, root) for _ in ps), tuple(ps))
        fs = [random_function(rng, root, exact=False) for _ in ps]
        ap = a_p_constant(wv)
        rep = sparse_weighted_check(fam, wv, fs, a_p=ap)
        rows.append([args.seed + trial, args.k, " ".join(map(str, ps)), sc.fmt(ap), repr(rep.lhs),
                     repr(rep.rhs_core), repr(rep.ratio)])
    write_csv(out / "weights.csv", WEIGHTS_HEADER, rows)
    pts = monotone_ensemble(root, ps, [0.1 * i for i in range(10)])
    slope = loglog_slope(pts)
    ok = slope <= slope_bound(ps)
    ser.save({"slope": repr(slope), "slope_bound": repr(slope_bound(ps)), "pass": bool(ok),
              "points": [[repr(p.a), repr(p.a_p), repr(p.norm_estimate)] for p in pts]},
             out / "weights_slope.json")
    print(f"weights: {len(rows)} trials, monotone slope {slope:.3f} (bound {slope_bound(ps):.3f})")
    return 0 if ok else 1


def cmd_gen(args) -> int:
    validate(args)
    out = output_dir(args)
    exact = args.mode == "rational"
    t = 0
    for m in args.m:
        for trial in range(args.trials):
            inst = random_instance(args.seed, args.d, args.k, m, args.depth, trial,
                                   exact=exact, normalize=args.normalize)
            ser.save(ser.instance_to_json(inst, seed=args.seed), out / f"instance_{t:04d}.json")
            t += 1
    print(f"gen: wrote {t} instance files to {out}")
    return 0


def cmd_assemble(args) -> int:
    if not args.inp:
        raise ConfigError("assemble needs --in with weighted families")
    fams = ser.weighted_families_from_json(ser.load(args.inp))
    root = RootCube(args.d, depth=args.depth)
    exact = args.mode == "rational"
    fs = [random_function(trial_rng(args.seed, i), root, exact=exact) for i in range(args.k)]
    grouped = regroup_families(fams, base_depth=args.depth)
    ident = regroup_identity(fams, grouped, fs)
    res = assemble_domination(grouped, fs)
    report = {
        "grids": [list(r) for r in sorted(grouped)],
        "norms": {",".join(map(str, r)): sc.fmt(g.mu.norm) for r, g in grouped.items()},
        "regroup_identity": bool(ident),
        "certified": bool(res.certified),
        "empirical_ratio": sc.fmt(res.empirical_ratio),
        "families": {",".join(map(str, r)): [ser.cube_to_json(c) for c in cs] for r, cs in res.families().items()},
    }
    out = output_dir(args)
    ser.save(report, out / "assemble.json")
    print(f"assemble: {len(grouped)} grids, {'certified' if res.certified and ident else 'FAILED'}")
    return 0 if res.certified and ident else 1


def _common(p: argparse.ArgumentParser, m_default: str = "1") -> None:
    p.add_argument("--d", type=int, default=1, help="dimension")
    p.add_argument("--k", type=int, default=1, help="number of input functions")
    p.add_argument("--m", type=parse_m, default=parse_m(m_default), help="complexity, or a range a..b")
    p.add_argument("--depth", type=int, default=4, help="finest generation J")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=["rational", "float"], default="rational")
    p.add_argument("--in", dest="inp", default=None, help="instance JSON instead of random generation")
    p.add_argument("--out", default=None, help=f"output directory (default ${OUTPUT_ENV})")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--normalize", action="store_true", help="scale alpha to Carleson norm 1")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparsedom", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("dominate", help="sparse domination runs")
    _common(p)
    p.add_argument("--constants", choices=["printed", "derived"], default="printed",
                   help="certify with the stated C_1 or with the selection weight T")
    p.set_defaults(func=cmd_dominate)
    p = sub.add_parser("weak-type", help="weak-type and L2 sweeps")
    _common(p)
    p.add_argument("--matched", action="store_true",
                   help="reuse the same instance for every m of the range (coefficients on levels >= max m)")
    p.set_defaults(func=cmd_weak_type)
    p = sub.add_parser("carleson", help="Carleson norm or sparseness of a file")
    p.add_argument("--check-sparse", action="store_true")
    p.add_argument("--eta", default=None)
    p.add_argument("--in", dest="inp", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_carleson)
    p = sub.add_parser("weights", help="weighted sparse bounds")
    _common(p)
    p.add_argument("--p", nargs="+", default=None, help="exponents p_1..p_k")
    p.set_defaults(func=cmd_weights)
    p = sub.add_parser("gen", help="write random instance files")
    _common(p)
    p.set_defaults(func=cmd_gen)
    p = sub.add_parser("assemble", help="regroup weighted grid families and dominate per grid")
    _common(p)
    p.set_defaults(func=cmd_assemble)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ser.FormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
