"""Ends at finite scale: the line and the two-way ladder.

Level spheres split into pieces by the components outside the ball; on
the line and ladder that gives two chains, one per end.  The reflection
swaps them, so it is broken right away by colouring the level spheres.
The per-end block iterations would need depth in the tens of thousands
and are skipped at this radius.
"""

import json

from symbreak.ends import component_tree, ends_pipeline
from symbreak.layered import generate

for family, radius in (("line", 40), ("two-way-ladder", 30)):
    g = generate(family, radius)
    tree = component_tree(g, 0.5)
    print(f"{family} radius {radius}: levels {tree.levels}, chains {tree.chains}")
    print("  tree dump:", json.dumps(tree.to_dict())[:110], "...")
    coloring, report = ends_pipeline(g, 0.5, seed=5)
    p1 = report["phase1"]
    print(f"  end movers {p1['movers']}, coloured {p1['support']} level vertices; "
          f"black {coloring.black.tolist()}")
    print(f"  per-end stops: {[s['reason'] for s in report['phase2']['stops']]}")
    print(f"  verification: {report['verification']}")

g = generate("grid2d", 20)
tree = component_tree(g, 0.5)
print(f"\ngrid radius 20: nodes per level {[len(tree.level_nodes(i)) for i in range(len(tree.levels))]} (one end)")
