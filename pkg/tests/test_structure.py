import numpy as np
import pytest
from hypothesis import given, strategies as st

from symbreak.automorphisms import automorphisms
from symbreak.designs import base_swap_example, finite_motion_example
from symbreak.errors import ConfigError
from symbreak.layered import generate
from symbreak.structure import (check_sphere_structure, disjoint_ray_witness, fixed_point_components,
                             sphere_motion_matrix)
from symbreak.perms import Permutation


def base_stabilizer(g):
    A = automorphisms(g)
    return A.subset(A.fixes(g.base))


@pytest.mark.parametrize("radius", [5, 8, 12])
def test_grid_has_no_violations(radius):
    g = generate("grid2d", radius)
    rep = check_sphere_structure(base_stabilizer(g), g)
    assert rep.ok and rep.n_elements == 8


def test_finite_motion_example_flagged():
    g = finite_motion_example()
    rep = check_sphere_structure(base_stabilizer(g), g)
    assert rep.setwise == []
    assert [p["sphere"] for p in rep.propagation] == [6]
    assert [r["sphere"] for r in rep.restriction] == [6, 7]


def test_margin_exempts_outer_spheres():
    g = finite_motion_example()
    rep = check_sphere_structure(base_stabilizer(g), g, margin=3)
    assert rep.ok


def test_requires_base_fixed():
    g = base_swap_example()
    with pytest.raises(ConfigError):
        check_sphere_structure(automorphisms(g), g)


def test_sphere_motion_matrix_brute():
    g = generate("grid2d", 4)
    A = base_stabilizer(g)
    mm = sphere_motion_matrix(A, g)
    for e, phi in enumerate(A):
        for n in range(g.radius + 1):
            assert mm[e, n] == sum(1 for v in g.sphere(n) if phi(v) != v)


@pytest.mark.parametrize("family,radius", [("grid2d", 6), ("two-way-ladder", 8), ("line", 7)])
def test_nonfixed_components_reach_boundary(family, radius):
    g = generate(family, radius)
    A = base_stabilizer(g)
    for phi in A.nontrivial():
        rep = fixed_point_components(phi, g)
        assert rep.claim_holds and rep.components
        for comp in rep.components:
            w = disjoint_ray_witness(phi, g, comp["vertices"])
            assert w.found
            assert not set(w.path) & set(w.image)
            assert [phi(v) for v in w.path] == w.image
            levels = g.level_of(np.array(w.path)).tolist()
            assert levels == sorted(levels) and levels[-1] == g.radius


def test_components_of_finite_motion_element():
    g = finite_motion_example()
    phi = base_stabilizer(g).nontrivial()[0]
    rep = fixed_point_components(phi, g)
    assert not rep.claim_holds
    assert [c["vertices"] for c in rep.interior] == [[9, 10, 11], [12, 13, 14]]
    with pytest.raises(ConfigError):
        disjoint_ray_witness(phi, g, [9, 10, 11])


def test_identity_has_no_components():
    g = generate("line", 3)
    assert fixed_point_components(Permutation.identity(g.ids), g).components == []


@given(st.integers(2, 9))
def test_line_reflection_components(radius):
    g = generate("line", radius)
    phi = base_stabilizer(g).nontrivial()[0]
    rep = fixed_point_components(phi, g)
    # the two half-lines
    assert len(rep.components) == 2 and rep.claim_holds
