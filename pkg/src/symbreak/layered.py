"""Finite truncations of infinite graph families, stratified into spheres.

Vertices are stored in sphere order: index 0 is the base vertex and
sphere ``n`` occupies the index range ``offsets[n]:offsets[n+1]``.  Vertex
ids are opaque non-negative integers; the built-in families number
vertices in breadth-first order, so ids coincide with indices there and a
larger truncation of the same family extends the id range of a smaller one.
"""

from __future__ import annotations

import json
import math
import re
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import sparse

from .errors import ConfigError, LayeringError, UnknownFamilyError

__all__ = [
    "LayeredGraph",
    "FamilySpec",
    "GrowthBudget",
    "GrowthReport",
    "generate",
    "ball",
    "growth_check",
    "sphere_to_ball_diagnostic",
    "load_layered",
    "save_layered",
]


class LayeredGraph:
    """A finite graph stratified into spheres around a base vertex.

    Instances are immutable; derived structures are computed lazily and cached.
    """

    def __init__(self, ids: np.ndarray, offsets: np.ndarray, edges: np.ndarray, *, check: bool = True):
        self.ids = np.ascontiguousarray(ids, dtype=np.int64)
        self.offsets = np.ascontiguousarray(offsets, dtype=np.int64)
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        lo = np.minimum(edges[:, 0], edges[:, 1])
        hi = np.maximum(edges[:, 0], edges[:, 1])
        key = np.unique(lo * max(len(self.ids), 1) + hi)
        n = max(len(self.ids), 1)
        self.edges = np.stack([key // n, key % n], axis=1)
        for arr in (self.ids, self.offsets, self.edges):
            arr.setflags(write=False)
        if check:
            self._validate()

    # -- construction -------------------------------------------------

    @classmethod
    def from_spheres(cls, spheres: Sequence[Iterable[int]], edges: Iterable[Sequence[int]]) -> "LayeredGraph":
        """Build from explicit sphere id lists and an id-based edge list."""
        spheres = [np.asarray(list(s) if not isinstance(s, np.ndarray) else s, dtype=np.int64) for s in spheres]
        if not spheres:
            raise LayeringError("a layered graph needs at least sphere 0")
        ids = np.concatenate(spheres) if spheres else np.zeros(0, np.int64)
        offsets = np.zeros(len(spheres) + 1, dtype=np.int64)
        offsets[1:] = np.cumsum([len(s) for s in spheres])
        if len(np.unique(ids)) != len(ids):
            raise LayeringError("spheres are not pairwise disjoint (repeated vertex id)")
        edges = np.asarray(edges if isinstance(edges, np.ndarray) else list(edges), dtype=np.int64).reshape(-1, 2)
        order = np.argsort(ids, kind="stable")
        sorted_ids = ids[order]
        pos = np.searchsorted(sorted_ids, edges)
        pos = np.clip(pos, 0, max(len(ids) - 1, 0))
        if len(edges) and not np.array_equal(sorted_ids[pos], edges):
            raise LayeringError("edge endpoint is not a vertex of any sphere")
        return cls(ids, offsets, order[pos])

    def _validate(self) -> None:
        sizes = np.diff(self.offsets)
        if len(sizes) == 0 or sizes[0] != 1:
            raise LayeringError("sphere 0 must consist of exactly the base vertex")
        if np.any(sizes[1:] == 0):
            raise LayeringError("empty sphere inside the truncation")
        if np.any(self.ids < 0):
            raise LayeringError("vertex ids must be non-negative")
        if len(np.unique(self.ids)) != len(self.ids):
            raise LayeringError("spheres are not pairwise disjoint (repeated vertex id)")
        u, v = self.edges[:, 0], self.edges[:, 1]
        if np.any(u == v):
            raise LayeringError("self-loop in edge list")
        lu, lv = self.level[u], self.level[v]
        if np.any(np.abs(lu - lv) > 1):
            bad = int(np.flatnonzero(np.abs(lu - lv) > 1)[0])
            raise LayeringError(
                f"edge {int(self.ids[u[bad]])}-{int(self.ids[v[bad]])} skips a sphere")
        has_parent = np.zeros(self.n_vertices, dtype=bool)
        has_parent[0] = True
        down = lu != lv
        child = np.where(lu > lv, u, v)[down]
        has_parent[child] = True
        if not has_parent.all():
            orphan = int(np.flatnonzero(~has_parent)[0])
            raise LayeringError(
                f"vertex {int(self.ids[orphan])} in sphere {int(self.level[orphan])} has no neighbor in the sphere below")

    # -- basic accessors ----------------------------------------------

    @property
    def base(self) -> int:
        return int(self.ids[0])

    @property
    def radius(self) -> int:
        return len(self.offsets) - 2

    @property
    def n_vertices(self) -> int:
        return len(self.ids)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def level(self) -> np.ndarray:
        """Sphere index of every vertex, by index."""
        lev = np.repeat(np.arange(len(self.offsets) - 1), np.diff(self.offsets))
        lev.setflags(write=False)
        return lev

    @cached_property
    def sphere_sizes(self) -> np.ndarray:
        return np.diff(self.offsets)

    @cached_property
    def ball_sizes(self) -> np.ndarray:
        return self.offsets[1:].copy()

    def sphere_slice(self, n: int) -> slice:
        self._check_n(n)
        return slice(int(self.offsets[n]), int(self.offsets[n + 1]))

    def sphere(self, n: int) -> np.ndarray:
        """Vertex ids of sphere ``n``."""
        return self.ids[self.sphere_slice(n)]

    @property
    def spheres(self) -> list[np.ndarray]:
        return [self.sphere(n) for n in range(self.radius + 1)]

    def _check_n(self, n: int) -> None:
        if not 0 <= n <= self.radius:
            raise ConfigError(f"sphere index {n} outside 0..{self.radius}")

    @cached_property
    def has_identity_ids(self) -> bool:
        return bool(np.array_equal(self.ids, np.arange(self.n_vertices)))

    @cached_property
    def sorted_ids(self) -> np.ndarray:
        return np.sort(self.ids)

    @cached_property
    def _id_order(self) -> np.ndarray:
        return np.argsort(self.ids, kind="stable")

    def index_of(self, ids) -> np.ndarray:
        """Map vertex ids to internal indices."""
        ids = np.asarray(ids, dtype=np.int64)
        if self.has_identity_ids:
            if ids.size and (ids.min() < 0 or ids.max() >= self.n_vertices):
                raise KeyError("unknown vertex id")
            return ids
        pos = np.searchsorted(self.sorted_ids, ids)
        pos = np.clip(pos, 0, self.n_vertices - 1)
        if not np.array_equal(self.sorted_ids[pos], ids):
            raise KeyError("unknown vertex id")
        return self._id_order[pos]

    def level_of(self, ids) -> np.ndarray:
        return self.level[self.index_of(ids)]

    @cached_property
    def adjacency(self) -> sparse.csr_matrix:
        n = self.n_vertices
        u, v = self.edges[:, 0], self.edges[:, 1]
        data = np.ones(2 * len(u), dtype=np.int8)
        adj = sparse.csr_matrix((data, (np.concatenate([u, v]), np.concatenate([v, u]))), shape=(n, n))
        adj.sort_indices()
        return adj

    @cached_property
    def degree(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr)

    def neighbors(self, index: int) -> np.ndarray:
        a = self.adjacency
        return a.indices[a.indptr[index]:a.indptr[index + 1]]

    def truncate(self, radius: int) -> "LayeredGraph":
        """The sub-truncation of the given radius (ball around the same base)."""
        if not 0 <= radius <= self.radius:
            raise ConfigError(f"cannot truncate radius {self.radius} graph to radius {radius}")
        cut = int(self.offsets[radius + 1])
        keep = (self.edges[:, 0] < cut) & (self.edges[:, 1] < cut)
        return LayeredGraph(self.ids[:cut], self.offsets[: radius + 2], self.edges[keep], check=False)

    # -- comparison and serialization ------------------------------------

    def __eq__(self, other) -> bool:
        if not isinstance(other, LayeredGraph):
            return NotImplemented
        return (np.array_equal(self.ids, other.ids) and np.array_equal(self.offsets, other.offsets)
                and np.array_equal(self.edges, other.edges))

    __hash__ = None  # mutable-looking container semantics; compare by value

    def __repr__(self) -> str:
        return f"LayeredGraph(radius={self.radius}, vertices={self.n_vertices}, edges={self.n_edges})"

    def to_dict(self) -> dict:
        ids = self.ids.tolist()
        return {
            "base": self.base,
            "spheres": [ids[self.offsets[n]:self.offsets[n + 1]] for n in range(self.radius + 1)],
            "edges": self.ids[self.edges].tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LayeredGraph":
        spheres = data["spheres"]
        if not spheres or list(spheres[0]) != [data["base"]]:
            raise LayeringError("sphere 0 must be exactly [base]")
        return cls.from_spheres(spheres, data.get("edges", []))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "LayeredGraph":
        return cls.from_dict(json.loads(text))


def load_layered(path) -> LayeredGraph:
    return LayeredGraph.from_json(Path(path).read_text())


def save_layered(g: LayeredGraph, path) -> None:
    Path(path).write_text(g.to_json())


# ---------------------------------------------------------------------------
# families


_KINDS = ("line", "two-way-ladder", "grid2d", "regular-tree", "synthetic")
_ALIASES = {"ladder": "two-way-ladder", "grid": "grid2d", "tree": "regular-tree", "path": "line"}


@dataclass(frozen=True)
class FamilySpec:
    kind: str
    params: dict = field(default_factory=dict, hash=False, compare=True)

    def __post_init__(self):
        kind = _ALIASES.get(self.kind, self.kind)
        if kind not in _KINDS:
            raise UnknownFamilyError(f"unknown family kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if kind == "regular-tree":
            d = self.params.get("degree")
            if not isinstance(d, (int, np.integer)) or d < 2:
                raise ConfigError("regular-tree needs an integer degree >= 2")

    @classmethod
    def parse(cls, text: str) -> "FamilySpec":
        """Parse ``line``, ``ladder``, ``grid2d``, ``regular-tree(3)``, ``tree:3`` or ``synthetic:<file>``."""
        text = text.strip()
        m = re.fullmatch(r"(regular-tree|tree)\s*[(:]\s*(\d+)\s*\)?", text)
        if m:
            return cls("regular-tree", {"degree": int(m.group(2))})
        if text.startswith("synthetic:"):
            path = text.split(":", 1)[1]
            data = json.loads(Path(path).read_text())
            return cls.synthetic(data)
        return cls(text)

    @classmethod
    def synthetic(cls, description: dict) -> "FamilySpec":
        """Wrap a layered description: either the layered-graph file format
        (``base``/``spheres``/``edges``) or ``sphere_sizes`` plus ``edges`` with
        ids numbered consecutively sphere by sphere."""
        if "spheres" not in description and "sphere_sizes" not in description:
            raise LayeringError("synthetic description needs 'spheres' or 'sphere_sizes'")
        return cls("synthetic", dict(description))

    @property
    def label(self) -> str:
        if self.kind == "regular-tree":
            return f"regular-tree({self.params['degree']})"
        return self.kind


def _lattice_bfs(neighbors: Callable, origin, radius: int):
    spheres = [[origin]]
    seen = {origin: 0}
    for n in range(radius):
        nxt = set()
        for v in spheres[-1]:
            for w in neighbors(v):
                if w not in seen:
                    nxt.add(w)
        nxt = sorted(nxt)
        for w in nxt:
            seen[w] = n + 1
        spheres.append(nxt)
    index = {}
    for s in spheres:
        for v in s:
            index[v] = len(index)
    edges = []
    for v, i in index.items():
        for w in neighbors(v):
            j = index.get(w)
            if j is not None and i < j:
                edges.append((i, j))
    sizes = [len(s) for s in spheres]
    return sizes, edges


def _from_sizes(sizes: Sequence[int], edges) -> LayeredGraph:
    offsets = np.zeros(len(sizes) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum(sizes)
    return LayeredGraph(np.arange(offsets[-1]), offsets, np.asarray(edges, dtype=np.int64).reshape(-1, 2))


def _line(radius: int) -> LayeredGraph:
    sizes = [1] + [2] * radius
    edges = []
    if radius >= 1:
        edges += [(0, 1), (0, 2)]
    for n in range(1, radius):
        edges += [(2 * n - 1, 2 * n + 1), (2 * n, 2 * n + 2)]
    return _from_sizes(sizes, edges)


def _regular_tree(d: int, radius: int) -> LayeredGraph:
    sizes = [1] + [d * (d - 1) ** (n - 1) for n in range(1, radius + 1)]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    parts = []
    if radius >= 1:
        parts.append(np.stack([np.zeros(d, np.int64), np.arange(1, d + 1)], axis=1))
    for n in range(2, radius + 1):
        parents = np.arange(offsets[n - 1], offsets[n])
        child = np.arange(offsets[n], offsets[n + 1])
        parts.append(np.stack([np.repeat(parents, d - 1), child], axis=1))
    edges = np.concatenate(parts) if parts else np.zeros((0, 2), np.int64)
    return LayeredGraph(np.arange(offsets[-1]), offsets, edges)


def _synthetic(params: dict, radius: int) -> LayeredGraph:
    if "spheres" in params:
        spheres = params["spheres"]
        if radius > len(spheres) - 1:
            raise LayeringError(f"description has radius {len(spheres) - 1}, requested {radius}")
        if "base" in params and list(spheres[0]) != [params["base"]]:
            raise LayeringError("sphere 0 must be exactly [base]")
        kept = spheres[: radius + 1]
        keep_ids = set(int(v) for s in kept for v in s)
        edges = [e for e in params.get("edges", []) if int(e[0]) in keep_ids and int(e[1]) in keep_ids]
        return LayeredGraph.from_spheres(kept, edges)
    sizes = [int(s) for s in params["sphere_sizes"]]
    if radius > len(sizes) - 1:
        raise LayeringError(f"description has radius {len(sizes) - 1}, requested {radius}")
    sizes = sizes[: radius + 1]
    total = sum(sizes)
    edges = np.asarray(params.get("edges", []), dtype=np.int64).reshape(-1, 2)
    if edges.size and edges.max() >= sum(int(s) for s in params["sphere_sizes"]):
        raise LayeringError("edge endpoint beyond the described vertices")
    edges = edges[(edges < total).all(axis=1)]
    return _from_sizes(sizes, edges)


def generate(spec: FamilySpec | str, radius: int) -> LayeredGraph:
    """BFS stratification of a family truncated to the ball of ``radius``."""
    if isinstance(spec, str):
        spec = FamilySpec.parse(spec)
    if not isinstance(radius, (int, np.integer)) or radius < 0:
        raise ConfigError(f"radius must be a non-negative integer, got {radius!r}")
    radius = int(radius)
    kind = spec.kind
    if kind == "line":
        return _line(radius)
    if kind == "two-way-ladder":
        sizes, edges = _lattice_bfs(
            lambda p: ((p[0] - 1, p[1]), (p[0] + 1, p[1]), (p[0], 1 - p[1])), (0, 0), radius)
        return _from_sizes(sizes, edges)
    if kind == "grid2d":
        sizes, edges = _lattice_bfs(
            lambda p: ((p[0] - 1, p[1]), (p[0] + 1, p[1]), (p[0], p[1] - 1), (p[0], p[1] + 1)), (0, 0), radius)
        return _from_sizes(sizes, edges)
    if kind == "regular-tree":
        return _regular_tree(int(spec.params["degree"]), radius)
    if kind == "synthetic":
        return _synthetic(spec.params, radius)
    raise UnknownFamilyError(kind)  # pragma: no cover


def ball(g: LayeredGraph, n: int) -> np.ndarray:
    """Vertex ids at distance at most ``n`` from the base."""
    if not 0 <= n <= g.radius:
        raise ConfigError(f"ball radius {n} outside 0..{g.radius}")
    return g.ids[: g.offsets[n + 1]]


# ---------------------------------------------------------------------------
# growth


@dataclass(frozen=True)
class GrowthBudget:
    epsilon: float
    c: float

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError(f"epsilon must lie strictly between 0 and 1, got {self.epsilon}")
        if not self.c > 0:
            raise ConfigError(f"growth constant must be positive, got {self.c}")

    def log2_bound(self, n):
        return math.log2(self.c) + (1.0 - self.epsilon) * np.sqrt(np.asarray(n, dtype=float)) / 2.0

    def bound(self, n):
        """c * 2^((1-eps) sqrt(n) / 2)."""
        return self.c * np.exp2((1.0 - self.epsilon) * np.sqrt(np.asarray(n, dtype=float)) / 2.0)

    @classmethod
    def fit(cls, sizes, epsilon: float) -> "GrowthBudget":
        """Smallest c for which every prefix sum of ``sizes`` (ball sizes) obeys the bound.

        ``sizes`` may be a LayeredGraph (its ball sizes are used) or any
        sequence of ball cardinalities indexed by radius.
        """
        if isinstance(sizes, LayeredGraph):
            sizes = sizes.ball_sizes
        sizes = np.asarray(sizes, dtype=float)
        n = np.arange(len(sizes))
        ratio = sizes / np.exp2((1.0 - epsilon) * np.sqrt(n) / 2.0)
        return cls(epsilon, float(ratio.max()))


@dataclass(frozen=True)
class GrowthReport:
    ball_sizes: np.ndarray
    bounds: np.ndarray
    ok: np.ndarray

    @property
    def passed(self) -> bool:
        return bool(self.ok.all())

    @property
    def first_failure(self) -> int | None:
        bad = np.flatnonzero(~self.ok)
        return int(bad[0]) if bad.size else None

    def rows(self) -> list[dict]:
        return [{"n": n, "ball": int(b), "bound": float(c), "ok": bool(o)}
                for n, (b, c, o) in enumerate(zip(self.ball_sizes, self.bounds, self.ok))]


def growth_check(g: LayeredGraph, budget: GrowthBudget) -> GrowthReport:
    """Compare |B(n)| against the budget for every n up to the truncation radius."""
    sizes = g.ball_sizes
    bounds = budget.bound(np.arange(len(sizes)))
    return GrowthReport(sizes, bounds, sizes <= bounds)


@dataclass(frozen=True)
class SphereBallDiagnostic:
    epsilon: float
    n_max: int
    log2_lhs: np.ndarray
    log2_rhs: np.ndarray

    @property
    def holds(self) -> np.ndarray:
        return self.log2_lhs <= self.log2_rhs

    @property
    def threshold(self) -> int | None:
        """Smallest n0 such that the inequality holds for every n0 <= n <= n_max."""
        h = self.holds
        if not h[-1]:
            return None
        bad = np.flatnonzero(~h)
        return int(bad[-1]) + 2 if bad.size else 1

    def summary(self) -> dict:
        t = self.threshold
        return {"epsilon": self.epsilon, "n_max": self.n_max, "threshold": t,
                "holds_anywhere": bool(self.holds.any()),
                "holds_from_threshold": t is not None}


def sphere_to_ball_diagnostic(budget: GrowthBudget | float, n_max: int) -> SphereBallDiagnostic:
    """Scan n = 1..n_max for  sum_{k<=n} 2^((1-e)sqrt(k)/2) <= 2^((1-e/2)sqrt(n)/2).

    Sums are accumulated in the log domain so large n do not overflow.
    """
    eps = budget.epsilon if isinstance(budget, GrowthBudget) else float(budget)
    if n_max < 1:
        raise ConfigError("n_max must be at least 1")
    n = np.arange(1, n_max + 1, dtype=float)
    terms = (1.0 - eps) * np.sqrt(n) / 2.0 * math.log(2.0)
    log_lhs = np.logaddexp.accumulate(terms) / math.log(2.0)
    log_rhs = (1.0 - eps / 2.0) * np.sqrt(n) / 2.0
    return SphereBallDiagnostic(eps, n_max, log_lhs, log_rhs)
