"""Compare the stated per-slice constant with the selection weight on deep chains.

A unit coefficient on every ancestor of one leaf, with all the mass of f on
that leaf, keeps every budget nearly drained.  The ratio climbs close to the
selection weight T = 2**k C_1, past C_1 itself.

    python3 demos/deep_chains.py
"""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from deep_chains import chain_instance_m0  # noqa: E402
from sparsedom import c1_constant, dominate_m0, selection_threshold  # noqa: E402

for d, J in [(1, 8), (1, 10), (1, 12), (2, 6)]:
    inst = chain_instance_m0(d, J, 0)
    printed = dominate_m0(inst.alpha, inst.fs)
    derived = dominate_m0(inst.alpha, inst.fs, "derived")
    r = float(printed.empirical_ratio / inst.alpha.norm)
    print(f"d={d} J={J:2d}: ratio/||alpha|| = {r:9.3f}   C_1 = {c1_constant(1, d)}, T = {selection_threshold(1, d)}"
          f"   printed {printed.certified}, derived {derived.certified}")
