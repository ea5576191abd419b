"""Exhaustive automorphism enumeration for layered graphs.

The search fixes an image b' for the base vertex, lays out the spheres
around b', and extends partial maps one sphere at a time.  A vertex of
sphere n+1 is pinned down by the image of its parent set (its neighbours
in sphere n) except for twins, i.e. vertices sharing a parent set, which
are permuted among themselves.  Branching is therefore confined to twin
classes, and inside those to vertices with equal refined colour.

Partial maps that agree on sphere n extend identically, so each level
keeps only its distinct sphere assignments plus, per frontier row, the
index of the assignment it uses and a back pointer.  Full images are
materialized once at the end.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import CapExceeded
from .layered import LayeredGraph
from .perms import DEFAULT_CAP, PermSet, dense_rank

__all__ = ["automorphisms", "refine_colors", "base_candidates"]

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLD = np.uint64(0x9E3779B97F4A7C15)


def mix64(x) -> np.ndarray:
    """SplitMix64 finalizer; a fixed pseudo-random uint64 per integer label."""
    z = np.asarray(x).astype(np.uint64) + _GOLD
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _segment_sum(values: np.ndarray, indptr: np.ndarray) -> np.ndarray:
    """Wrapping uint64 sums over CSR segments; empty segments give 0."""
    out = np.zeros(len(indptr) - 1, dtype=np.uint64)
    if values.size == 0:
        return out
    nonempty = np.flatnonzero(np.diff(indptr) > 0)
    if nonempty.size:
        out[nonempty] = np.add.reduceat(values, indptr[nonempty])
    return out


def refine_colors(adj: sparse.csr_matrix, colors, *, stop=None, max_rounds: int | None = None) -> np.ndarray:
    """Colour refinement (1-dimensional Weisfeiler-Leman) from an initial colouring.

    Colours are dense ranks of (old colour, hashed neighbour multiset), so
    two runs on the same union graph name their classes consistently.
    ``stop(colors)`` may end the loop early.
    """
    colors = dense_rank(np.asarray(colors))
    n_col = int(colors.max()) + 1 if colors.size else 0
    rounds = 0
    while True:
        if stop is not None and stop(colors):
            return colors
        if max_rounds is not None and rounds >= max_rounds:
            return colors
        h = _segment_sum(mix64(colors[adj.indices]), adj.indptr)
        new = dense_rank(colors, h)
        rounds += 1
        n_new = int(new.max()) + 1 if new.size else 0
        if n_new == n_col:
            return new
        colors, n_col = new, n_new


def base_candidates(g: LayeredGraph) -> list[int]:
    """Vertex indices that an automorphism could send the base to.

    Screened by unseeded colour refinement and by the sphere profile and
    per-level edge counts of the layering around each candidate.
    """
    if g.n_vertices == 1:
        return [0]
    adj = g.adjacency
    colors = refine_colors(adj, np.zeros(g.n_vertices, dtype=np.int64),
                           stop=lambda c: np.count_nonzero(c == c[0]) == 1)
    cand = np.flatnonzero(colors == colors[0])
    out = [0]
    ref = _edge_profile(g, g.level)
    for b in cand[1:]:
        dist = _bfs_levels(adj, int(b))
        if dist is None or dist.max() != g.radius:
            continue
        if not np.array_equal(np.bincount(dist, minlength=g.radius + 1), g.sphere_sizes):
            continue
        if _edge_profile(g, dist) != ref:
            continue
        out.append(int(b))
    return out


def _bfs_levels(adj, b: int):
    d = csgraph.shortest_path(adj, unweighted=True, indices=b, directed=False)
    if not np.isfinite(d).all():
        return None
    return d.astype(np.int64)


def _edge_profile(g: LayeredGraph, level: np.ndarray) -> tuple:
    lu, lv = level[g.edges[:, 0]], level[g.edges[:, 1]]
    lo = np.minimum(lu, lv)
    same = lu == lv
    r = g.radius + 1
    return (tuple(np.bincount(lo[same], minlength=r)), tuple(np.bincount(lo[~same], minlength=r)))


@dataclass
class _Layout:
    """Spheres and twin classes of a layering; classes are numbered globally."""
    spheres: list             # vertex indices per sphere, sorted
    pos: np.ndarray           # position of each vertex inside its sphere
    cls_start: np.ndarray     # classes of sphere n are cls_start[n]:cls_start[n+1]
    cls_hash: np.ndarray      # parent-set hash per class
    cls_ptr: np.ndarray       # members of class c are members[cls_ptr[c]:cls_ptr[c+1]]
    members: np.ndarray
    par_pos: np.ndarray       # parent positions of each class representative, grouped by class
    par_ptr: np.ndarray
    child: np.ndarray         # unique child in the next sphere, or -1
    path_level: np.ndarray    # sphere n: single parents, no twins, no inner edges


def _layout(g: LayeredGraph, level: np.ndarray) -> _Layout:
    N = g.n_vertices
    R = g.radius
    order = np.lexsort((np.arange(N), level))
    counts = np.bincount(level, minlength=R + 1)
    bounds = np.concatenate([[0], np.cumsum(counts)])
    spheres = [order[bounds[n]:bounds[n + 1]] for n in range(R + 1)]
    pos = np.empty(N, dtype=np.int64)
    pos[order] = np.arange(N) - np.repeat(bounds[:-1], counts)

    u, v = g.edges[:, 0], g.edges[:, 1]
    lu, lv = level[u], level[v]
    cross = lu != lv
    par = np.where(lu < lv, u, v)[cross]
    chi = np.where(lu < lv, v, u)[cross]
    inner_lvl = lu[~cross]

    weight = mix64(np.arange(N))
    ph = np.zeros(N, dtype=np.uint64)
    np.add.at(ph, chi, weight[par])
    npar = np.bincount(chi, minlength=N)
    nchild = np.bincount(par, minlength=N)
    child = np.full(N, -1, dtype=np.int64)
    one = nchild[par] == 1
    child[par[one]] = chi[one]

    cls = dense_rank(level, ph)
    n_cls = int(cls.max()) + 1
    members = np.lexsort((np.arange(N), cls))
    csize = np.bincount(cls, minlength=n_cls)
    cls_ptr = np.concatenate([[0], np.cumsum(csize)])
    cls_hash = ph[members[cls_ptr[:-1]]]
    cls_level = level[members[cls_ptr[:-1]]]
    cls_start = np.searchsorted(cls_level, np.arange(R + 2))

    is_rep = np.zeros(N, dtype=bool)
    is_rep[members[cls_ptr[:-1]]] = True
    sel = is_rep[chi]
    rc, rp = cls[chi[sel]], par[sel]
    o = np.lexsort((rp, rc))
    par_pos = pos[rp[o]]
    par_ptr = np.concatenate([[0], np.cumsum(np.bincount(rc, minlength=n_cls))])

    inner = np.bincount(inner_lvl, minlength=R + 1)
    multi_par = np.bincount(level[npar > 1], minlength=R + 1)
    twins = np.bincount(cls_level[csize > 1], minlength=R + 1)
    path_level = (inner == 0) & (multi_par == 0) & (twins == 0)
    path_level[0] = False
    return _Layout(spheres, pos, cls_start, cls_hash, cls_ptr, members, par_pos, par_ptr, child, path_level)


def _ranges(lens: np.ndarray) -> np.ndarray:
    """Concatenation of arange(l) for each l in lens."""
    total = int(lens.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    start = np.repeat(np.cumsum(lens) - lens, lens)
    return np.arange(total) - start


def _level_edges(g: LayeredGraph, layout: _Layout, level: np.ndarray):
    """Per sphere n >= 1: edges into sphere n-1 and inside sphere n, in local positions."""
    u, v = g.edges[:, 0], g.edges[:, 1]
    swap = level[u] > level[v]
    a = np.where(swap, v, u)
    b = np.where(swap, u, v)
    inner = level[a] == level[b]
    out = [None] * (g.radius + 1)
    R = g.radius
    for kind, mask in ((0, ~inner), (1, inner)):
        aa, bb = a[mask], b[mask]
        o = np.argsort(level[bb], kind="stable")
        aa, bb = aa[o], bb[o]
        cut = np.searchsorted(level[bb], np.arange(R + 2))
        for n in range(1, R + 1):
            pair = (layout.pos[aa[cut[n]:cut[n + 1]]], layout.pos[bb[cut[n]:cut[n + 1]]])
            out[n] = pair if kind == 0 else out[n] + pair
    return out


class _EdgeSet:
    def __init__(self, g: LayeredGraph):
        self.n = np.int64(max(g.n_vertices, 1))
        self.keys = np.sort(g.edges[:, 0] * self.n + g.edges[:, 1])

    def contains(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        key = np.minimum(a, b) * self.n + np.maximum(a, b)
        if self.keys.size == 0:
            return np.zeros(key.shape, dtype=bool)
        i = np.clip(np.searchsorted(self.keys, key), 0, len(self.keys) - 1)
        return self.keys[i] == key


def _unique_rows(rows: np.ndarray):
    if len(rows) == 1:
        return rows, np.zeros(1, dtype=np.int64)
    inv = dense_rank(*rows.T)
    first = np.full(int(inv.max()) + 1, len(rows))
    np.minimum.at(first, inv, np.arange(len(rows)))
    return rows[first], inv


def _enumerate_from(g: LayeredGraph, src: _Layout, src_edges, tgt: _Layout, edgeset: _EdgeSet,
                    cs: np.ndarray, ct: np.ndarray, b: int, cap: int, budget: int):
    """All automorphisms sending the base to target index ``b``, as a dense (k, N) array."""
    weight = mix64(np.arange(g.n_vertices))
    U = np.array([[b]], dtype=np.int64)
    levels = [(U, np.zeros(1, dtype=np.uint8), None)]
    f = 1
    for n in range(1, g.radius + 1):
        sphere = src.spheres[n]
        c0, c1 = src.cls_start[n], src.cls_start[n + 1]
        if src.path_level[n] and tgt.path_level[n]:
            # every vertex has one parent and no twin: images follow the parents
            ppos = src.par_pos[src.par_ptr[c0]:src.par_ptr[c1]]
            E = tgt.child[U[:, ppos]]
            cols = src.pos[src.members[src.cls_ptr[c0]:src.cls_ptr[c1]]]
            ext = np.empty_like(E)
            ext[:, cols] = E
            if (ext >= 0).all() and (ct[ext] == cs[sphere]).all():
                a = levels[-1][1]
                if len(sphere) < len(src.spheres[n - 1]) and len(ext) > 1:
                    # strands ended: distinct assignments may have merged
                    ext, inv = _unique_rows(ext)
                    a_new = inv[a].astype(_small_dtype(len(ext)))
                    if a_new.dtype != a.dtype or not np.array_equal(a_new, a):
                        a = a_new
                levels.append((ext, a, None))
                U = ext
                continue

        pp0, pp1 = src.par_ptr[c0], src.par_ptr[c1]
        flat_pos = src.par_pos[pp0:pp1]
        seg = src.par_ptr[c0:c1] - pp0
        H = np.add.reduceat(weight[U[:, flat_pos]], seg, axis=1)
        t0, t1 = tgt.cls_start[n], tgt.cls_start[n + 1]
        th = tgt.cls_hash[t0:t1]
        if len(th) == 0:
            return np.zeros((0, g.n_vertices), dtype=np.int64)
        loc = np.clip(np.searchsorted(th, H), 0, len(th) - 1)
        tcls = t0 + loc
        src_size = np.diff(src.cls_ptr[c0:c1 + 1])
        ok = (th[loc] == H) & (np.diff(tgt.cls_ptr)[tcls] == src_size)
        base_rows = np.flatnonzero(ok.all(axis=1))

        cls_ids = np.arange(c0, c1)
        single = np.flatnonzero(src_size == 1)
        multi = np.flatnonzero(src_size > 1)
        ext = np.empty((len(base_rows), len(sphere)), dtype=np.int64)
        if single.size:
            cols = src.pos[src.members[src.cls_ptr[cls_ids[single]]]]
            ext[:, cols] = tgt.members[tgt.cls_ptr[tcls[base_rows][:, single]]]
        cand_rows, cand_parent = [], []
        if multi.size == 0:
            cand_rows.append(ext)
            cand_parent.append(base_rows)
        else:
            for r_i, r in enumerate(base_rows):
                options = []
                count = 1
                for c in multi:
                    cg = c0 + c
                    smem = src.members[src.cls_ptr[cg]:src.cls_ptr[cg + 1]]
                    tc = tcls[r, c]
                    tmem = tgt.members[tgt.cls_ptr[tc]:tgt.cls_ptr[tc + 1]]
                    opts = _colored_bijections(smem, tmem, cs, ct)
                    count *= len(opts)
                    if count * f > budget:
                        raise CapExceeded(f"automorphism search frontier exceeds cap {cap} at sphere {n}",
                                          cap, partial={"sphere": n, "frontier": f})
                    options.append((src.pos[smem], opts))
                if count == 0:
                    continue
                rows = np.repeat(ext[r_i][None, :], count, axis=0)
                stride = count
                for cols, opts in options:
                    stride //= len(opts)
                    idx = (np.arange(count) // stride) % len(opts)
                    rows[:, cols] = opts[idx]
                cand_rows.append(rows)
                cand_parent.append(np.full(count, r, dtype=np.int64))
        cand = np.concatenate(cand_rows) if cand_rows else np.zeros((0, len(sphere)), np.int64)
        parent = np.concatenate(cand_parent) if cand_parent else np.zeros(0, np.int64)

        if len(cand):
            good = (ct[cand] == cs[sphere]).all(axis=1)
            ca, cb, ia, ib = src_edges[n]
            if len(ca):
                good &= edgeset.contains(U[parent][:, ca], cand[:, cb]).all(axis=1)
            if len(ia):
                good &= edgeset.contains(cand[:, ia], cand[:, ib]).all(axis=1)
            cand, parent = cand[good], parent[good]

        if len(cand) == 0:
            return np.zeros((0, g.n_vertices), dtype=np.int64)
        U_new, inv = _unique_rows(cand)
        # children of each old unique row, as CSR
        o = np.argsort(parent, kind="stable")
        child_cnt = np.bincount(parent, minlength=len(U))
        child_ptr = np.concatenate([[0], np.cumsum(child_cnt)])
        child_idx = inv[o]
        a_old = levels[-1][1]
        rep = child_cnt[a_old]
        f_new = int(rep.sum())
        if f_new > cap:
            raise CapExceeded(f"automorphism count exceeds cap {cap} at sphere {n}", cap,
                              partial={"sphere": n, "frontier": f_new})
        if np.all(rep == 1):
            back = None
            a_new = child_idx[child_ptr[a_old]]
        else:
            back = np.repeat(np.arange(f), rep)
            a_new = child_idx[np.repeat(child_ptr[a_old], rep) + _ranges(rep)]
        a_new = a_new.astype(_small_dtype(len(U_new)))
        prev = levels[-1][1]
        if back is None and prev.dtype == a_new.dtype and np.array_equal(prev, a_new):
            a_new = prev
        levels.append((U_new, a_new, back))
        U, f = U_new, f_new

    out = np.empty((f, g.n_vertices), dtype=np.int32 if g.n_vertices < 2**31 else np.int64)
    rows = np.arange(f)
    for n in range(g.radius, -1, -1):
        U_n, a_n, back = levels[n]
        out[:, src.spheres[n]] = U_n[a_n[rows]]
        if back is not None:
            rows = back[rows]
    return out


def _small_dtype(n: int):
    if n <= 2**8:
        return np.uint8
    if n <= 2**16:
        return np.uint16
    return np.int64


def _colored_bijections(smem: np.ndarray, tmem: np.ndarray, cs: np.ndarray, ct: np.ndarray) -> np.ndarray:
    """Colour-preserving bijections smem -> tmem, as rows of target indices aligned with smem."""
    scol, tcol = cs[smem], ct[tmem]
    if not np.array_equal(np.sort(scol), np.sort(tcol)):
        return np.zeros((0, len(smem)), dtype=np.int64)
    parts = []
    for col in np.unique(scol):
        sidx = np.flatnonzero(scol == col)
        tv = tmem[tcol == col]
        perms = np.array(list(itertools.permutations(tv)), dtype=np.int64).reshape(-1, len(tv))
        parts.append((sidx, perms))
    total = math.prod(len(p) for _, p in parts)
    out = np.empty((total, len(smem)), dtype=np.int64)
    stride = total
    for sidx, perms in parts:
        stride //= len(perms)
        idx = (np.arange(total) // stride) % len(perms)
        out[:, sidx] = perms[idx]
    return out


def automorphisms(g: LayeredGraph, cap: int = DEFAULT_CAP) -> PermSet:
    """The full automorphism group of the finite graph ``g``, enumerated explicitly.

    Raises :class:`CapExceeded` when the group (or the search frontier)
    grows beyond ``cap`` elements.
    """
    N = g.n_vertices
    budget = cap * 8
    if g.radius == 0:
        return PermSet(np.sort(g.ids), np.zeros((1, 1), dtype=np.int64), closed=True, cap=cap, canonical=True)
    adj = g.adjacency
    src = _layout(g, g.level)
    src_edges = _level_edges(g, src, g.level)
    edgeset = _EdgeSet(g)
    blocks = []
    total = 0
    for b in base_candidates(g):
        if b == 0:
            cs = ct = refine_colors(adj, g.level)
            tgt = src
        else:
            dist = _bfs_levels(adj, b)
            both = sparse.block_diag([adj, adj], format="csr")
            both.sort_indices()
            col = refine_colors(both, np.concatenate([g.level, dist]))
            cs, ct = col[:N], col[N:]
            if cs[0] != ct[b]:
                continue
            tgt = _layout(g, dist)
        found = _enumerate_from(g, src, src_edges, tgt, edgeset, cs, ct, b, cap, budget)
        total += len(found)
        if total > cap:
            raise CapExceeded(f"automorphism count exceeds cap {cap}", cap, partial={"found": total})
        if len(found):
            blocks.append(found)
    images = np.concatenate(blocks) if len(blocks) > 1 else blocks[0]
    if not g.has_identity_ids:
        # graph index order -> id-sorted domain positions
        order = g._id_order
        pos_of_index = np.empty(N, dtype=np.int64)
        pos_of_index[order] = np.arange(N)
        images = pos_of_index[images[:, order]]
    return PermSet(np.sort(g.ids), images, closed=True, cap=cap, owned=True)
