import json

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, strategies as st

from symbreak.errors import ConfigError, LayeringError, UnknownFamilyError
from symbreak.layered import (FamilySpec, GrowthBudget, LayeredGraph, ball, generate, growth_check,
                              load_layered, save_layered, sphere_to_ball_diagnostic)

from conftest import layered_from_networkx, to_networkx

# sphere sizes computed with networkx BFS on independently built lattices
ORACLE_SPHERES = {
    ("line", 5): [1, 2, 2, 2, 2, 2],
    ("two-way-ladder", 6): [1, 3, 4, 4, 4, 4, 4],
    ("grid2d", 4): [1, 4, 8, 12, 16],
    ("regular-tree(3)", 3): [1, 3, 6, 12],
    ("regular-tree(4)", 2): [1, 4, 12],
}


@pytest.mark.parametrize("family,radius", list(ORACLE_SPHERES))
def test_sphere_sizes_match_bfs_oracle(family, radius):
    g = generate(family, radius)
    assert g.sphere_sizes.tolist() == ORACLE_SPHERES[(family, radius)]
    assert g.ball_sizes[-1] == g.n_vertices


def test_grid_radius_25_size():
    g = generate("grid2d", 25)
    assert g.n_vertices == 1301
    assert g.sphere_sizes[1:].tolist() == [4 * n for n in range(1, 26)]


@pytest.mark.parametrize("family", ["line", "ladder", "grid2d", "tree:3"])
def test_layering_is_bfs_distance(family):
    g = generate(family, 6)
    dist = nx.single_source_shortest_path_length(to_networkx(g), int(g.base))
    assert all(dist[int(v)] == int(lv) for v, lv in zip(g.ids, g.level))


def test_line_id_convention():
    g = generate("line", 3)
    assert g.sphere(1).tolist() == [1, 2] and g.sphere(3).tolist() == [5, 6]


@pytest.mark.parametrize("text,kind", [("ladder", "two-way-ladder"), ("grid", "grid2d"),
                                       ("regular-tree(3)", "regular-tree"), ("tree:5", "regular-tree")])
def test_family_parse(text, kind):
    assert FamilySpec.parse(text).kind == kind


def test_unknown_family():
    with pytest.raises(UnknownFamilyError):
        generate("hexagonal", 3)


def test_negative_radius():
    with pytest.raises(ConfigError):
        generate("line", -1)


def test_layering_violation_rejected():
    # edge skipping a sphere
    with pytest.raises(LayeringError):
        LayeredGraph.from_spheres([[0], [1], [2]], [(0, 1), (0, 2)])
    # vertex without a parent in the previous sphere
    with pytest.raises(LayeringError):
        LayeredGraph.from_spheres([[0], [1, 2], [3]], [(0, 1), (1, 2), (2, 3)])


def test_json_roundtrip(tmp_path):
    g = generate("two-way-ladder", 5)
    path = tmp_path / "g.json"
    save_layered(g, path)
    assert load_layered(path) == g
    data = json.loads(path.read_text())
    assert set(data) == {"base", "spheres", "edges"}


def test_synthetic_family(tmp_path):
    g = generate("grid2d", 3)
    path = tmp_path / "s.json"
    save_layered(g, path)
    assert generate(f"synthetic:{path}", 2) == g.truncate(2)
    with pytest.raises(LayeringError):
        generate(f"synthetic:{path}", 4)


def test_ball():
    g = generate("grid2d", 4)
    assert len(ball(g, 2)) == 13


def test_growth_fit_is_tight():
    g = generate("grid2d", 12)
    budget = GrowthBudget.fit(g, 0.5)
    assert growth_check(g, budget).passed
    assert not growth_check(g, GrowthBudget(0.5, budget.c * 0.999)).passed


def test_growth_first_failure_tree():
    # ball sizes of the 3-regular tree: 1, 4, 10, 22, 46, 94, ...
    g = generate("tree:3", 8)
    rep = growth_check(g, GrowthBudget(0.5, 50.0))
    assert not rep.passed and rep.first_failure == 5


@pytest.mark.parametrize("eps,c", [(0.0, 1.0), (1.0, 1.0), (0.5, 0.0), (1.2, 3.0)])
def test_budget_rejects_bad_parameters(eps, c):
    with pytest.raises(ConfigError):
        GrowthBudget(eps, c)


def test_sphere_ball_diagnostic_threshold():
    # threshold from a plain float summation loop
    d = sphere_to_ball_diagnostic(GrowthBudget(0.5, 1.0), 10000)
    assert d.threshold == 6017
    assert d.holds[6017 - 1:].all() and not d.holds[6017 - 2]


def test_sphere_ball_diagnostic_edges():
    assert sphere_to_ball_diagnostic(0.99, 100).threshold is None
    one = sphere_to_ball_diagnostic(0.5, 1)
    assert one.threshold == 1 and len(one.holds) == 1
    with pytest.raises(ConfigError):
        sphere_to_ball_diagnostic(0.5, 0)


@given(st.integers(2, 25), st.integers(0, 40), st.randoms(use_true_random=False))
def test_random_graph_layering_roundtrip(n, extra, rnd):
    tree = nx.random_labeled_tree(n, seed=rnd.randint(0, 10**6))
    G = nx.Graph(tree)
    nodes = list(G.nodes)
    for _ in range(extra):
        a, b = rnd.choice(nodes), rnd.choice(nodes)
        if a != b:
            G.add_edge(a, b)
    g = layered_from_networkx(G, nodes[0])
    # spheres partition the vertices; every vertex past the base has a neighbour one sphere in
    assert sorted(g.ids.tolist()) == list(range(n))
    lv = g.level
    src, dst = g.adjacency.nonzero()
    assert (np.abs(lv[src] - lv[dst]) <= 1).all()
    for v in range(1, n):
        assert (lv[g.neighbors(v)] == lv[v] - 1).any()
    assert LayeredGraph.from_json(g.to_json()) == g
