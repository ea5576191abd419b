"""Why large motion lets two colours break a set of permutations.

A permutation preserves exactly 2^(cycles) colourings, and a permutation
with motion m has at most n - m/2 cycles.  Summing over a set A, fewer than
2^n colourings are preserved by something in A as soon as the motion beats
2 log2 |A|.  This demo checks the counting on random sets and then watches
the search succeed.
"""

import numpy as np

from symbreak.motion import bound_check, bound_instances, double_count_check, sample_failures, search_coloring
from symbreak.perms import Permutation, random_permset

rng = np.random.default_rng(2024)

phi = Permutation.from_cycles(range(6), [(0, 1, 2), (3, 4)])
print(f"cycles {phi.cycles} -> preserved colourings 2^{phi.n_cycles} = {2 ** phi.n_cycles}")

A = random_permset(rng, 10, 6)
lhs, rhs = double_count_check(A)
print(f"double count on 6 random permutations of 10 points: {lhs} == {rhs}")

print("\nrandom instances where motion > 2 log2 |A|:")
for A, S in bound_instances(rng, 5, min_points=10, max_points=14):
    chk = bound_check(A, S)
    col, stats = search_coloring(A, S, "exhaustive")
    fails, bound = sample_failures(A, S, 5000, seed=1)
    print(f"  |S|={len(S):2d} |A|={chk.set_size:3d} motion={chk.group_motion:2d} "
          f"threshold={chk.threshold:5.2f}  first breaking code after {stats.tries:4d} tries; "
          f"random failure rate {fails / 5000:.4f} <= bound {bound:.4f}")
