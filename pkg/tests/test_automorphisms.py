import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from symbreak.automorphisms import automorphisms, base_candidates, refine_colors
from symbreak.designs import base_swap_example, finite_motion_example, strand_spider
from symbreak.errors import CapExceeded
from symbreak.layered import LayeredGraph, generate

from conftest import brute_automorphisms, layered_from_networkx


def as_tuples(A, g):
    ids = g.ids.tolist()
    return {tuple(p(v) for v in ids) for p in A}


# group orders counted by networkx VF2 on independently built truncations
ORACLE_ORDERS = [("line", 5, 2), ("two-way-ladder", 1, 6), ("two-way-ladder", 6, 2), ("grid2d", 1, 24),
                 ("grid2d", 2, 8), ("grid2d", 4, 8), ("regular-tree(3)", 3, 3072), ("regular-tree(4)", 2, 31104)]


@pytest.mark.parametrize("family,radius,order", ORACLE_ORDERS)
def test_group_order_matches_vf2(family, radius, order):
    assert len(automorphisms(generate(family, radius))) == order


@pytest.mark.parametrize("family,radius", [("line", 4), ("two-way-ladder", 3), ("grid2d", 3), ("tree:3", 2)])
def test_elements_match_vf2(family, radius):
    g = generate(family, radius)
    A = automorphisms(g)
    assert as_tuples(A, g) == brute_automorphisms(g)
    assert A.is_closed()


def test_large_grid_order():
    assert len(automorphisms(generate("grid2d", 25))) == 8


def test_designs():
    assert len(automorphisms(base_swap_example())) == 2
    assert len(automorphisms(finite_motion_example())) == 2
    # Sym(3) x Sym(5) x Sym(2)
    assert len(automorphisms(strand_spider(20))) == 6 * 120 * 2


def test_base_swap_mover():
    g = base_swap_example()
    A = automorphisms(g)
    mover = A.nontrivial()[0]
    assert mover.cycles == [(0, 5), (1, 2), (3, 6), (4, 7)]


def test_cap_exceeded():
    with pytest.raises(CapExceeded) as exc:
        automorphisms(generate("tree:3", 3), cap=100)
    assert exc.value.cap == 100


def test_non_identity_ids():
    # same ladder with ids shuffled away from sphere order
    g = generate("two-way-ladder", 3)
    perm = np.random.default_rng(3).permutation(g.n_vertices) + 100
    spheres = [sorted(perm[g.sphere(n)].tolist()) for n in range(g.radius + 1)]
    src, dst = g.adjacency.nonzero()
    h = LayeredGraph.from_spheres(spheres, list(zip(perm[src].tolist(), perm[dst].tolist())))
    assert as_tuples(automorphisms(h), h) == brute_automorphisms(h)


def test_refinement_and_candidates():
    g = generate("grid2d", 2)
    colors = refine_colors(g.adjacency, np.zeros(g.n_vertices, dtype=np.int64))
    assert len(np.unique(colors)) >= 3
    assert g.base in base_candidates(g)


@st.composite
def small_graphs(draw):
    n = draw(st.integers(2, 11))
    seed = draw(st.integers(0, 10**6))
    p = draw(st.floats(0.0, 0.6))
    G = nx.Graph(nx.random_labeled_tree(n, seed=seed))
    rng = np.random.default_rng(seed)
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < p * 0.5:
                G.add_edge(a, b)
    return layered_from_networkx(G, 0)


@settings(max_examples=80)
@given(small_graphs())
def test_random_graphs_match_vf2(g):
    assert as_tuples(automorphisms(g), g) == brute_automorphisms(g)


@st.composite
def symmetric_graphs(draw):
    # blow up a small tree: every vertex becomes a twin class, so groups are large
    n = draw(st.integers(2, 5))
    seed = draw(st.integers(0, 10**6))
    mult = draw(st.lists(st.integers(1, 3), min_size=n, max_size=n))
    T = nx.random_labeled_tree(n, seed=seed)
    G = nx.Graph()
    for v in T:
        G.add_nodes_from((v, i) for i in range(mult[v]))
    for a, b in T.edges:
        G.add_edges_from(((a, i), (b, j)) for i in range(mult[a]) for j in range(mult[b]))
    return layered_from_networkx(G, (0, 0))


@settings(max_examples=50)
@given(symmetric_graphs())
def test_twin_heavy_graphs_match_vf2(g):
    assert as_tuples(automorphisms(g), g) == brute_automorphisms(g)
