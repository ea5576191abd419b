"""Boundary-component trees and the many-ended breaking pipeline.

A finite truncation cannot see ends directly.  Instead we pick a few
uncoloured level spheres n_1 < n_2 < ..., split each level sphere by the
components of the graph outside the ball of radius n_i - 1, and link the
pieces into a rooted tree.  Root-to-leaf chains of that tree stand in for
ends.  Automorphisms permuting tree nodes are broken first, by colouring
level spheres; the remaining ones are handled end by end with the block
scheme.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csgraph

from .automorphisms import automorphisms
from .errors import CeilingExceeded, ConfigError, GrowthRefusal, SearchFailure, TruncationTooShallow
from .layered import GrowthBudget, LayeredGraph
from .motion import PartialColoring, search_coloring, surviving_mask
from .perms import DEFAULT_CAP, PermSet
from .scheme import (DEFAULT_CEILING, SchemeParams, _check_eps, _colored_spheres, choose_k,
                     effective_constant, fixroot, scheme_step, verification)

__all__ = [
    "level_gap",
    "choose_levels",
    "ComponentTree",
    "component_tree",
    "end_fixing_split",
    "break_end_movers",
    "Schedule",
    "ends_pipeline",
]


def level_gap(epsilon: float) -> int:
    """Smallest integer spacing strictly larger than 4/eps."""
    return math.floor(4.0 / epsilon) + 1


def choose_levels(g: LayeredGraph, epsilon: float, exclude=()) -> list[int]:
    """Greedy levels: each at least ``level_gap`` past the previous (the base counts as 0),
    skipping excluded spheres and never using the outermost sphere."""
    _check_eps(epsilon)
    gap = level_gap(epsilon)
    exclude = set(int(x) for x in exclude)
    levels = []
    n = gap
    while n <= g.radius - 1:
        while n in exclude:
            n += 1
        if n > g.radius - 1:
            break
        levels.append(n)
        n += gap
    if len(levels) < 2:
        raise TruncationTooShallow(
            f"radius {g.radius} leaves room for {len(levels)} level(s) with spacing {gap}; need 2")
    return levels


@dataclass
class ComponentTree:
    """Level spheres split by outer components.

    ``nodes`` is a flat list of ``{"level", "vertices", "parent"}`` dicts in
    level order; ``level`` is the position in ``levels`` and ``parent`` the
    index of the parent node (``None`` for children of the root).
    """

    root: int
    levels: list
    nodes: list
    region_of: np.ndarray = field(repr=False, default=None)   # per vertex index: deepest node, or -1

    def level_nodes(self, i: int) -> list[int]:
        return [j for j, nd in enumerate(self.nodes) if nd["level"] == i]

    def children(self, j: int) -> list[int]:
        return [c for c, nd in enumerate(self.nodes) if nd["parent"] == j]

    @property
    def chains(self) -> list[list[int]]:
        """Root-to-leaf node paths, ordered by their first node."""
        out = []

        def walk(j, path):
            kids = self.children(j)
            if not kids:
                out.append(path + [j])
            for c in kids:
                walk(c, path + [j])

        for j in self.level_nodes(0):
            walk(j, [])
        return out

    @property
    def support(self) -> np.ndarray:
        """All vertices lying in some node."""
        if not self.nodes:
            return np.zeros(0, dtype=np.int64)
        return np.sort(np.concatenate([np.asarray(nd["vertices"], dtype=np.int64) for nd in self.nodes]))

    def chain_region(self, g: LayeredGraph, chain) -> np.ndarray:
        """Ids of vertices beyond the first level whose outer component belongs to ``chain``."""
        on = np.zeros(len(self.nodes) + 1, dtype=bool)
        on[list(chain)] = True
        return g.ids[np.flatnonzero(on[self.region_of])]

    def to_dict(self) -> dict:
        return {"levels": list(self.levels),
                "nodes": [{"level": int(self.levels[nd["level"]]), "vertices": nd["vertices"],
                           "parent": nd["parent"]} for nd in self.nodes]}


def component_tree(g: LayeredGraph, epsilon: float, exclude=(), levels=None) -> ComponentTree:
    """Build the component tree on ``levels`` (chosen automatically when omitted)."""
    if levels is None or levels == "auto":
        levels = choose_levels(g, epsilon, exclude)
    else:
        levels = sorted(int(n) for n in levels)
        if len(levels) < 1 or levels[0] < 1 or levels[-1] > g.radius - 1:
            raise ConfigError(f"levels must lie in 1..{g.radius - 1}")
        if len(set(levels)) != len(levels):
            raise ConfigError("levels must be distinct")
        clash = sorted(set(levels) & set(int(x) for x in exclude))
        if clash:
            raise ConfigError(f"levels {clash} are already coloured")
    adj = g.adjacency
    nodes = []
    region = np.full(g.n_vertices, -1, dtype=np.int64)
    prev_comp = None          # component label per vertex index at the previous level
    prev_node_of_comp = None
    for li, n in enumerate(levels):
        outer = np.flatnonzero(g.level >= n)
        _, lab = csgraph.connected_components(adj[outer][:, outer], directed=False)
        comp = np.full(g.n_vertices, -1, dtype=np.int64)
        comp[outer] = lab
        sph = np.arange(g.offsets[n], g.offsets[n + 1])
        # order nodes by smallest member id for stable numbering
        labs = comp[sph]
        first = {}
        for v, c in sorted(zip(g.ids[sph].tolist(), labs.tolist())):
            first.setdefault(c, v)
        order = sorted(first, key=first.get)
        node_of_comp = {}
        for c in order:
            members = np.sort(g.ids[sph[labs == c]])
            parent = None
            if prev_comp is not None:
                # any member lies in a single component of the previous (larger) complement
                parent = prev_node_of_comp[int(prev_comp[sph[labs == c][0]])]
            node_of_comp[c] = len(nodes)
            nodes.append({"level": li, "vertices": members.tolist(), "parent": parent})
        lut = np.full(int(lab.max()) + 2 if lab.size else 1, -1, dtype=np.int64)
        for c, j in node_of_comp.items():
            lut[c] = j
        region[outer] = lut[comp[outer]]
        prev_comp, prev_node_of_comp = comp, node_of_comp
    region[region < 0] = len(nodes)     # sentinel slot, never "on"
    return ComponentTree(int(g.ids[0]), list(levels), nodes, region)


def _node_labels(A: PermSet, tree: ComponentTree) -> tuple[np.ndarray, np.ndarray]:
    lab = np.full(len(A.domain), -1, dtype=np.int64)
    for j, nd in enumerate(tree.nodes):
        lab[A.positions(nd["vertices"])] = j
    pos = np.flatnonzero(lab >= 0)
    return lab, pos


def end_fixing_split(A: PermSet, tree: ComponentTree) -> tuple[PermSet, PermSet]:
    """Split into elements fixing every tree node setwise and elements permuting some nodes."""
    if not tree.nodes or len(A) == 0:
        return A, A.subset(np.zeros(len(A), dtype=bool))
    if not A.fixes(tree.root).all():
        raise ConfigError("every element must fix the root")
    lab, pos = _node_labels(A, tree)
    mover = np.zeros(len(A), dtype=bool)
    for c0 in range(0, pos.size, 1 << 14):
        c = pos[c0:c0 + (1 << 14)]
        mover |= (lab[A.take(c)] != lab[c]).any(axis=1)
    return A.subset(~mover, closed=A.closed), A.subset(mover)


def break_end_movers(movers: PermSet, tree: ComponentTree, *, seed: int = 0) -> tuple[PartialColoring, dict]:
    """Colour the level spheres so that no node-permuting element survives."""
    if len(movers) == 0:
        return PartialColoring.empty(), {}
    msg = "level spheres cannot break every end-permuting automorphism; add levels"
    try:
        coloring, stats = search_coloring(movers, tree.support, force=True, seed=seed, stream=(0, 1))
    except SearchFailure as exc:
        raise SearchFailure(msg, exc.stats) from exc
    left = surviving_mask(coloring, movers)
    if left.any():
        raise SearchFailure(msg, {"survivors": int(left.sum())})
    return coloring, stats.to_dict()


@dataclass(frozen=True)
class Schedule:
    """Round-robin step -> end assignment over a finite horizon."""

    n_ends: int
    horizon: int

    def __post_init__(self):
        if self.n_ends < 1:
            raise ConfigError("a schedule needs at least one end")

    def __call__(self, step: int) -> int:
        return step % self.n_ends

    def __iter__(self):
        return (self(t) for t in range(self.horizon))

    def counts(self) -> list[int]:
        return np.bincount(np.fromiter(self, dtype=np.int64, count=self.horizon),
                           minlength=self.n_ends).tolist()


def _chain_growth(tree: ComponentTree, chain, epsilon: float, c) -> dict:
    n = np.array([tree.levels[tree.nodes[j]["level"]] for j in chain], dtype=float)
    sizes = np.array([len(tree.nodes[j]["vertices"]) for j in chain], dtype=float)
    denom = np.exp2((1.0 - epsilon) * np.sqrt(n) / 2.0)
    fitted = float((sizes / denom).max())
    c_val = fitted if c is None or c == "auto" else float(c)
    ok = sizes <= c_val * denom * (1.0 + 1e-12)
    first = int(n[np.flatnonzero(~ok)[0]]) if not ok.all() else None
    return {"c": c_val, "sizes": sizes.astype(int).tolist(), "passed": bool(ok.all()), "first_failure": first}


def ends_pipeline(g: LayeredGraph, epsilon: float, c_per_end=None, *, seed: int = 0, force: bool = False,
                  margin: int = 1, levels=None, cap: int = DEFAULT_CAP, group: PermSet | None = None,
                  ceiling: int = DEFAULT_CEILING, horizon: int | None = None) -> tuple[PartialColoring, dict]:
    """Pin the base, break end-permuting automorphisms on level spheres, then run
    the block scheme end by end in round-robin order."""
    _check_eps(epsilon)
    if c_per_end is not None and c_per_end != "auto" and not float(c_per_end) > 0:
        raise ConfigError("growth constant must be positive")
    report = {"config": {"epsilon": epsilon, "c": "auto" if c_per_end in (None, "auto") else float(c_per_end),
                         "seed": seed, "force": force, "margin": margin, "radius": g.radius,
                         "levels": "auto" if levels in (None, "auto") else sorted(int(x) for x in levels)}}

    A = automorphisms(g, cap=cap) if group is None else group
    base_movers = ~A.fixes(g.base)
    stab = A.subset(~base_movers, closed=A.closed)
    report["group"] = {"order": len(A), "base_movers": int(base_movers.sum()), "stabilizer": len(stab)}

    delta = epsilon / 4.0
    fr = fixroot(g, A.subset(base_movers), delta, seed=seed)
    report["fixroot"] = fr.to_dict()
    coloring = fr.coloring
    colored = set(fr.colored)

    tree = component_tree(g, epsilon, exclude=colored, levels=levels)
    chains = tree.chains
    growth = [_chain_growth(tree, ch, epsilon, c_per_end) for ch in chains]
    report["tree"] = {"levels": tree.levels, "nodes_per_level": [len(tree.level_nodes(i)) for i in range(len(tree.levels))],
                      "chains": chains}
    report["growth"] = growth
    bad = [i for i, gr in enumerate(growth) if not gr["passed"]]
    if bad and not force:
        gr = growth[bad[0]]
        raise GrowthRefusal(f"end {bad[0]} exceeds its growth budget at sphere {gr['first_failure']}",
                            gr["first_failure"], report)

    # phase 1: automorphisms permuting tree nodes
    fixers, movers = end_fixing_split(stab, tree)
    end_col, end_stats = break_end_movers(movers, tree, seed=seed)
    coloring = coloring.merge(end_col)
    colored |= _colored_spheres(g, end_col)
    report["phase1"] = {"movers": len(movers), "fixers": len(fixers), "support": len(end_col),
                        **({"search": end_stats} if end_stats else {})}

    # phase 2: per-end block iterations
    state = [0] * len(chains)
    done = [False] * len(chains)
    last = [None] * len(chains)
    regions = [tree.chain_region(g, ch) for ch in chains]
    sched = Schedule(max(1, len(chains)), horizon if horizon is not None else 64 * max(1, len(chains)))
    steps = []
    stops = {}
    for t, e in enumerate(sched):
        if not chains or all(done):
            break
        if done[e]:
            continue
        m, c_e = state[e], growth[e]["c"]
        ct = effective_constant(c_e, m, epsilon)
        room = g.radius - margin - m
        try:
            k = choose_k(ct, epsilon, fr.k0, ceiling)
        except CeilingExceeded as exc:
            if ceiling < room:
                raise
            done[e] = True
            stops[e] = {"reason": "no admissible depth inside the truncation", "m": m, "c_tilde": ct,
                        "failing": list(exc.failing)}
            continue
        if m + k > g.radius - margin:
            done[e] = True
            stops[e] = {"reason": "next block run exceeds the truncation", "m": m, "c_tilde": ct, "next_k": k}
            continue
        params = SchemeParams(epsilon, c_e, m, ct, k, fr.k0, delta)
        window = regions[e][(g.level_of(regions[e]) > m) & (g.level_of(regions[e]) <= m + k)]
        alive = surviving_mask(coloring, fixers) if len(coloring) else np.ones(len(fixers), dtype=bool)
        targets = fixers.subset(alive & fixers.moves_any(window))
        step = scheme_step(g, targets, params, colored, seed=seed, iteration=t + 1, vertex_filter=regions[e])
        coloring = coloring.merge(step.coloring)
        colored |= _colored_spheres(g, step.coloring)
        steps.append({"step": t, "end": e, **step.record})
        last[e] = m
        state[e] = m + k
    report["phase2"] = {"steps": steps, "stops": [stops.get(e) for e in range(len(chains))]}

    covered = [m for m in last if m is not None]
    m_cov = max(covered) + 1 if covered else 0
    extra = np.zeros(len(A), dtype=bool)
    if len(movers):
        extra[np.flatnonzero(~base_movers)[_mover_rows(stab, tree)]] = True
    report["verification"] = verification(g, A, coloring, m_cov, extra_mask=extra)
    return coloring, report


def _mover_rows(stab: PermSet, tree: ComponentTree) -> np.ndarray:
    if not tree.nodes or len(stab) == 0:
        return np.zeros(0, dtype=np.int64)
    lab, pos = _node_labels(stab, tree)
    return np.flatnonzero((lab[stab.take(pos)] != lab[pos]).any(axis=1))
