"""The block scheme on a square grid, and why it does nothing at this scale.

The grid has polynomial growth, so the auto-fitted constant is modest, but
the least admissible block depth is still in the millions.  A radius-25
truncation therefore colours nothing, and the verification set is empty.
The structural checks on the same group do go through.
"""

from symbreak.automorphisms import automorphisms
from symbreak.layered import GrowthBudget, generate, sphere_to_ball_diagnostic
from symbreak.structure import check_sphere_structure, disjoint_ray_witness, fixed_point_components
from symbreak.scheme import choose_k, run_pipeline

g = generate("grid2d", 25)
budget = GrowthBudget.fit(g, 0.9)
print(f"grid radius 25: {g.n_vertices} vertices, fitted c = {budget.c:.1f} at eps = 0.9")
print(f"least block depth for that constant: k = {choose_k(budget.c, 0.9):,}")
for ct in (1, 4, 16):
    print(f"  c~ = {ct:2d}: k(eps=0.5) = {choose_k(ct, 0.5):,}   k(eps=0.9) = {choose_k(ct, 0.9):,}")

coloring, report = run_pipeline(g, 0.9, seed=1)
print(f"\npipeline: {len(report['iterations'])} iterations, stop: {report['stop']['reason']}")
print(f"verification: {report['verification']}")

A = automorphisms(g)
stab = A.subset(A.fixes(g.base))
print(f"\nstabilizer of the centre has {len(stab)} elements; sphere checks: "
      f"{check_sphere_structure(stab, g).violations} violations")
for phi in stab.nontrivial():
    comps = fixed_point_components(phi, g)
    found = all(disjoint_ray_witness(phi, g, c["vertices"]).found for c in comps.components)
    print(f"  motion {phi.motion:4d}: {len(comps.components)} moved component(s), all reach the boundary: "
          f"{comps.claim_holds}, disjoint paths found: {found}")

d = sphere_to_ball_diagnostic(0.5, 10_000)
print(f"\nsphere bound implies ball bound from n = {d.threshold} on (eps = 0.5)")
