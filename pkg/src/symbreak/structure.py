"""Finite-truncation checks of structural facts about base-fixing automorphisms.

Three properties are checked for automorphisms fixing the base vertex:
spheres are fixed setwise, once a sphere is moved every later sphere is
moved too (infinite motion seen through a finite window), and equality on
a sphere forces equality on the whole ball inside it.  Near the truncation
boundary automorphisms of the finite graph need not extend, so the last
``margin`` spheres are exempt from the latter two.

The component and ray helpers are finite stand-ins for the statement that
a nontrivial automorphism has only infinite non-fixed components, each of
which carries a ray mapped to a disjoint ray.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csgraph

from .errors import ConfigError
from .layered import LayeredGraph
from .perms import PermSet, Permutation, lex_unique, dense_rank, motion_by_groups

__all__ = [
    "SphereStructureReport",
    "check_sphere_structure",
    "sphere_motion_matrix",
    "ComponentReport",
    "fixed_point_components",
    "RayWitness",
    "disjoint_ray_witness",
]


def _domain_levels(domain: np.ndarray, g: LayeredGraph) -> np.ndarray:
    return g.level_of(domain)


def sphere_motion_matrix(A: PermSet, g: LayeredGraph) -> np.ndarray:
    """Restricted motion of every element on every sphere, shape (len(A), radius+1)."""
    return motion_by_groups(A, _domain_levels(A.domain, g), g.radius + 1)


@dataclass
class SphereStructureReport:
    radius: int
    margin: int
    n_elements: int
    setwise: list = field(default_factory=list)        # elements moving some vertex off its sphere
    propagation: list = field(default_factory=list)    # {"element", "from", "sphere"}
    restriction: list = field(default_factory=list)    # {"sphere", "sphere_classes", "ball_classes"}

    @property
    def violations(self) -> int:
        return len(self.setwise) + len(self.propagation) + len(self.restriction)

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return {"radius": self.radius, "margin": self.margin, "elements": self.n_elements,
                "violations": self.violations, "setwise": self.setwise,
                "propagation": self.propagation, "restriction": self.restriction}


def check_sphere_structure(A: PermSet, g: LayeredGraph, margin: int = 1) -> SphereStructureReport:
    """Check sphere invariance, motion propagation and sphere/ball agreement."""
    if len(A) and not A.fixes(g.base).all():
        raise ConfigError("every element must fix the base vertex")
    R = g.radius
    top = R - margin
    rep = SphereStructureReport(R, margin, len(A))
    if len(A) == 0:
        return rep
    lev = _domain_levels(A.domain, g)

    # (1) spheres fixed setwise
    moved_off = np.zeros(len(A), dtype=bool)
    for c0 in range(0, len(A.domain), 8192):
        cols = A.take(slice(c0, c0 + 8192))
        moved_off |= (lev[cols] != lev[c0:c0 + 8192]).any(axis=1)
    rep.setwise = np.flatnonzero(moved_off).tolist()

    # (2) propagation: after the first moved sphere, no sphere up to top is fixed pointwise
    mm = motion_by_groups(A, lev, R + 1)
    for e in range(len(A)):
        moving = np.flatnonzero(mm[e, :R] > 0)
        if moving.size == 0:
            continue
        first = int(moving[0])
        still = np.flatnonzero(mm[e, first + 1:top + 1] == 0)
        if still.size:
            j = first + 1 + int(still[0])
            rep.propagation.append({"element": e, "from": j - 1, "sphere": j})

    # (3) agreeing on sphere i <=> agreeing on ball i
    ball_rank = np.zeros(len(A), dtype=np.int64)
    order = np.argsort(lev, kind="stable")
    bounds = np.searchsorted(lev[order], np.arange(R + 2))
    for i in range(0, max(top, -1) + 1):
        cols = order[bounds[i]:bounds[i + 1]]
        _, sphere_rank = lex_unique(A.take(cols))
        ball_rank = dense_rank(ball_rank, sphere_rank)
        ns, nb = int(sphere_rank.max()) + 1, int(ball_rank.max()) + 1
        if ns != nb:
            rep.restriction.append({"sphere": i, "sphere_classes": ns, "ball_classes": nb})
    return rep


@dataclass
class ComponentReport:
    components: list      # each: {"vertices": [...], "touches_outer": bool, "levels": [lo, hi]}

    @property
    def claim_holds(self) -> bool:
        return all(c["touches_outer"] for c in self.components)

    @property
    def interior(self) -> list:
        return [c for c in self.components if not c["touches_outer"]]

    def to_dict(self) -> dict:
        return {"components": self.components, "claim_holds": self.claim_holds}


def _as_graph_perm(phi: Permutation, g: LayeredGraph) -> np.ndarray:
    """Image of every graph index under ``phi`` (identity outside its domain)."""
    img = np.arange(g.n_vertices)
    idx = g.index_of(phi.domain)
    img[idx] = g.index_of(phi.domain[phi.image])
    return img


def fixed_point_components(phi: Permutation, g: LayeredGraph) -> ComponentReport:
    """Connected components of the subgraph induced on the vertices ``phi`` moves."""
    img = _as_graph_perm(phi, g)
    moved = np.flatnonzero(img != np.arange(g.n_vertices))
    if moved.size == 0:
        return ComponentReport([])
    sub = g.adjacency[moved][:, moved]
    n, lab = csgraph.connected_components(sub, directed=False)
    comps = []
    for c in range(n):
        members = moved[lab == c]
        lv = g.level[members]
        comps.append({"vertices": sorted(g.ids[members].tolist()),
                      "touches_outer": bool((lv == g.radius).any()),
                      "levels": [int(lv.min()), int(lv.max())]})
    comps.sort(key=lambda c: c["vertices"][0])
    return ComponentReport(comps)


@dataclass
class RayWitness:
    found: bool
    root: int | None = None          # the fixed neighbour the path hangs from
    path: list = field(default_factory=list)
    image: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"found": self.found, "root": self.root, "path": self.path, "image": self.image}


def disjoint_ray_witness(phi: Permutation, g: LayeredGraph, component) -> RayWitness:
    """A monotone path from a fixed neighbour of ``component`` out to the last sphere,
    vertex-disjoint from its image under ``phi``.
    """
    comp_idx = np.unique(g.index_of(np.asarray(list(component), dtype=np.int64)))
    if not (g.level[comp_idx] == g.radius).any():
        raise ConfigError("component does not reach the outermost sphere")
    img = _as_graph_perm(phi, g)
    if img[0] != 0:
        raise ConfigError("the permutation must fix the base vertex")
    in_comp = np.zeros(g.n_vertices, dtype=bool)
    in_comp[comp_idx] = True
    adj = g.adjacency
    nbrs = np.unique(adj[comp_idx].indices)
    roots = nbrs[~in_comp[nbrs] & (img[nbrs] == nbrs)]
    if roots.size == 0:
        return RayWitness(False)
    root = int(roots[np.lexsort((g.ids[roots], g.level[roots]))[0]])
    nodes = np.concatenate([[root], comp_idx])
    sub = adj[nodes][:, nodes]
    bfs, pred = csgraph.breadth_first_order(sub, 0, directed=False, return_predecessors=True)
    outer = [v for v in bfs if v != 0 and g.level[nodes[v]] == g.radius]
    for end in outer:
        chain = []
        v = end
        while v != 0:
            chain.append(v)
            v = pred[v]
        path = nodes[chain[::-1]]
        image = img[path]
        if not np.intersect1d(path, image).size:
            return RayWitness(True, int(g.ids[root]), g.ids[path].tolist(), g.ids[image].tolist())
    return RayWitness(False, int(g.ids[root]))
