"""Run the selection on a tiny lattice, then on a random instance, and print what it certifies.

    python3 demos/domination_walkthrough.py
"""
from sparsedom import CoefficientSequence, GridFunction, RootCube, dominate_full
from sparsedom.instances import random_instance


def show(label, res):
    cubes = sorted((q.level, q.index) for q in res.family.cubes)
    print(f"{label}: |S| = {len(cubes)}, ||alpha|| = {res.norm}, C = {res.c_theory}")
    print(f"  worst leaf ratio {float(res.empirical_ratio):.4g}, certified {res.certified}, "
          f"stages {res.stages_ok}, sparse {res.sparsity_pass}")
    if len(cubes) <= 6:
        print(f"  selected cubes (level, index): {cubes}")


# d = 1, depth 2, alpha = 1 on levels 1 and 2, f = 1.  Only the top cube is selected.
root = RootCube(1, depth=2)
alpha = CoefficientSequence.from_mapping(root, {c: 1 for j in (1, 2) for c in root.cubes(j)})
f = GridFunction.constant(root, 1)
show("two-level example, m = 1", dominate_full(alpha, [f], 1))

# A random bilinear instance in the square, exact arithmetic throughout.
inst = random_instance(7, 2, 2, 2, 4, 0)
show("random d=2 k=2 m=2", dominate_full(inst.alpha, inst.fs, inst.m))

for m in range(5):
    inst = random_instance(3, 1, 1, m, 6, m)
    res = dominate_full(inst.alpha, inst.fs, m)
    print(f"m = {m}: ratio/((m+1)||alpha||) = {float(res.ratio_per_complexity):.3f}, certified {res.certified}")
