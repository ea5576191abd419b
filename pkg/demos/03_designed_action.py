"""A layered graph built so that the block classes are really exercised.

Three long strands and seven short ones meet at the base.  Permuting the
long strands moves a vertex on every sphere; permuting short strands only
touches the first few spheres, so those elements land in the first class
(and, having finite motion, break the propagation invariant).  The radius
is chosen so that exactly one block iteration fits.  Takes ~20 s and ~1.5 GB.
"""

import time

from symbreak.designs import spider_radius, strand_spider
from symbreak.layered import GrowthBudget
from symbreak.scheme import choose_k, run_pipeline

g = strand_spider(spider_radius(70649))
c = GrowthBudget.fit(g, 0.5).c
print(f"spider: {g.n_vertices:,} vertices, radius {g.radius}, fitted c = {c:.3f}, depth k = {choose_k(c, 0.5):,}")

t = time.perf_counter()
coloring, report = run_pipeline(g, 0.5, seed=7)
print(f"pipeline took {time.perf_counter() - t:.1f}s, group order {report['group']['order']}")
for it in report["iterations"]:
    print(f"  m={it['m']} k={it['k']} kappa={it['kappa']} r={it['r']} targets={it['targets']}")
    sizes = {i + 1: s for i, s in enumerate(it["class_sizes"]) if s}
    print(f"  nonempty classes: {sizes}; finite-motion violations: {it['invariant_violations']}")
    for b in it["bound_margins"]:
        print(f"    class {b['class']}: motion {b['motion']} vs 2 log2 |A_i| = {b['two_log_size']:.2f} "
              f"-> {'holds' if b['hypothesis'] else 'FAILS'}")
v = report["verification"]
print(f"verification: checked {v['checked']}, survivors {len(v['survivors'])}; coloured vertices {len(coloring)}")
