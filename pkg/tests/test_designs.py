import pytest

from symbreak.automorphisms import automorphisms
from symbreak.designs import base_swap_example, finite_motion_example, spider_radius, strand_spider


def test_spider_spheres():
    g = strand_spider(15)
    # 3 deep strands, 5 of length 10 and 2 of length 11
    assert g.sphere_sizes.tolist() == [1] + [10] * 10 + [5] + [3] * 4


def test_spider_rejects_long_shallow_strands():
    with pytest.raises(ValueError):
        strand_spider(8)


def test_spider_group_structure():
    g = strand_spider(14)
    A = automorphisms(g)
    assert len(A) == 1440 and A.fixes(g.base).all()
    # elements moving the last sphere permute deep strands: 5 * 240 of them
    assert int(A.moves_any(g.sphere(14)).sum()) == 1200


def test_spider_radius():
    assert spider_radius(100) == 111


def test_finite_motion_element_is_local():
    g = finite_motion_example()
    phi = automorphisms(g).nontrivial()[0]
    moved = sorted(set(g.level_of(phi.moved).tolist()))
    assert moved == [3, 4, 5]


def test_base_swap_spheres():
    g = base_swap_example()
    assert g.sphere_sizes.tolist() == [1, 4, 2, 1]
