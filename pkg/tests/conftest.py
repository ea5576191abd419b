import networkx as nx
import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from symbreak.layered import LayeredGraph

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def to_networkx(g: LayeredGraph) -> nx.Graph:
    G = nx.Graph()
    G.add_nodes_from(g.ids.tolist())
    src, dst = g.adjacency.nonzero()
    G.add_edges_from(zip(g.ids[src].tolist(), g.ids[dst].tolist()))
    return G


def layered_from_networkx(G: nx.Graph, base) -> LayeredGraph:
    """BFS-layer a connected networkx graph, relabelling vertices 0..n-1 in sphere order."""
    dist = nx.single_source_shortest_path_length(G, base)
    order = sorted(G.nodes, key=lambda v: (dist[v], str(v)))
    label = {v: i for i, v in enumerate(order)}
    spheres = [[] for _ in range(max(dist.values()) + 1)]
    for v in order:
        spheres[dist[v]].append(label[v])
    edges = [(label[a], label[b]) for a, b in G.edges]
    return LayeredGraph.from_spheres(spheres, edges)


def brute_automorphisms(g: LayeredGraph) -> set:
    """All automorphisms as tuples of image ids, via networkx VF2."""
    G = to_networkx(g)
    ids = g.ids.tolist()
    return {tuple(m[v] for v in ids) for m in nx.algorithms.isomorphism.GraphMatcher(G, G).isomorphisms_iter()}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[n])
