"""Permutations of finite vertex sets and explicitly enumerated sets of them.

A permutation is stored against a sorted domain of vertex ids; its image
array holds *positions* in that domain.  A :class:`PermSet` keeps many
permutations of one domain as the rows of a 2-D array, canonically sorted
(lexicographic over the image ids, taken in domain order) and free of
duplicates.
"""

from __future__ import annotations

import json
import math
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse

from .errors import NotSetwiseFixed

__all__ = [
    "Permutation",
    "PermSet",
    "dense_rank",
    "lex_unique",
    "cycle_labels",
    "stabilizer",
    "restrict",
    "restrict_set",
    "motion",
    "restricted_motion",
    "group_motion",
    "motion_by_groups",
    "random_permset",
]

DEFAULT_CAP = 100_000
_COL_CHUNK = 8192


def dense_rank(*keys) -> np.ndarray:
    """Dense lexicographic rank of the tuples ``(keys[0][i], keys[1][i], ...)``."""
    n = len(keys[0])
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    order = np.lexsort(keys[::-1])
    change = np.zeros(n, dtype=bool)
    for k in keys:
        ks = np.asarray(k)[order]
        change[1:] |= ks[1:] != ks[:-1]
    ranks = np.empty(n, dtype=np.int64)
    ranks[order] = np.cumsum(change)
    return ranks


def lex_unique(rows: np.ndarray, chunk: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Lexicographically sorted distinct rows of a 2-D integer array.

    Returns ``(index, inverse)``: ``rows[index]`` are the distinct rows in
    order, and ``inverse[i]`` is the position of row ``i`` among them.
    Ties are refined one column block at a time and only for rows that are
    still tied, so wide arrays whose rows differ early stay cheap.
    """
    n, w = rows.shape
    if n == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    rank = np.zeros(n, dtype=np.int64)
    c0 = 0
    while c0 < w:
        counts = np.bincount(rank)
        active = np.flatnonzero(counts[rank] > 1)
        if active.size == 0:
            break
        c1 = min(w, c0 + chunk)
        sub = rows[active, c0:c1]
        local = dense_rank(rank[active], *(sub[:, j] for j in range(c1 - c0)))
        t = np.zeros(n, dtype=np.int64)
        t[active] = local
        rank = dense_rank(rank, t)
        c0 = c1
        chunk = min(chunk * 2, 2048)
    order = np.argsort(rank, kind="stable")
    _, first = np.unique(rank[order], return_index=True)
    return order[first], rank


def cycle_labels(images: np.ndarray) -> np.ndarray:
    """Smallest position on the cycle through each position (1-D or row-wise 2-D)."""
    images = np.asarray(images)
    if images.ndim == 1:
        n = len(images)
        rep = np.arange(n)
        p = images.astype(np.int64, copy=True)
        for _ in range(max(1, math.ceil(math.log2(max(n, 2)))) + 1):
            rep = np.minimum(rep, rep[p])
            p = p[p]
        return rep
    m, n = images.shape
    rep = np.broadcast_to(np.arange(n, dtype=images.dtype), (m, n)).copy()
    p = images.copy()
    for _ in range(max(1, math.ceil(math.log2(max(n, 2)))) + 1):
        np.minimum(rep, np.take_along_axis(rep, p, axis=1), out=rep)
        p = np.take_along_axis(p, p, axis=1)
    return rep


def _positions(domain: np.ndarray, ids) -> np.ndarray:
    ids = np.asarray(ids, dtype=np.int64)
    pos = np.searchsorted(domain, ids)
    pos = np.clip(pos, 0, max(len(domain) - 1, 0))
    if len(domain) == 0 or not np.array_equal(domain[pos], ids):
        if ids.size:
            raise KeyError("vertex not in permutation domain")
    return pos


class Permutation:
    """A bijection of a finite, sorted set of vertex ids."""

    __slots__ = ("domain", "image", "_labels")

    def __init__(self, domain, image):
        self.domain = np.asarray(domain, dtype=np.int64)
        self.image = np.asarray(image, dtype=np.int64)
        self._labels = None
        if self.image.shape != self.domain.shape:
            raise ValueError("image and domain differ in length")
        if len(self.image) and not np.array_equal(np.sort(self.image), np.arange(len(self.image))):
            raise ValueError("image is not a bijection of the domain")

    @classmethod
    def from_mapping(cls, mapping: Mapping[int, int]) -> "Permutation":
        domain = np.array(sorted(int(k) for k in mapping), dtype=np.int64)
        targets = np.array([int(mapping[int(k)]) for k in domain], dtype=np.int64)
        if not np.array_equal(np.sort(targets), domain):
            raise ValueError("mapping is not a bijection of its keys")
        return cls(domain, np.searchsorted(domain, targets))

    @classmethod
    def from_cycles(cls, domain: Iterable[int], cycles: Iterable[Sequence[int]] = ()) -> "Permutation":
        mapping = {int(v): int(v) for v in domain}
        for cyc in cycles:
            for a, b in zip(cyc, list(cyc[1:]) + [cyc[0]]):
                mapping[int(a)] = int(b)
        return cls.from_mapping(mapping)

    @classmethod
    def identity(cls, domain) -> "Permutation":
        domain = np.sort(np.asarray(domain, dtype=np.int64))
        return cls(domain, np.arange(len(domain)))

    def __call__(self, v):
        out = self.domain[self.image[_positions(self.domain, v)]]
        return int(out) if np.ndim(v) == 0 else out

    @property
    def mapping(self) -> dict[int, int]:
        return dict(zip(self.domain.tolist(), self.domain[self.image].tolist()))

    @property
    def labels(self) -> np.ndarray:
        if self._labels is None:
            self._labels = cycle_labels(self.image)
        return self._labels

    @property
    def cycles(self) -> list[tuple[int, ...]]:
        """Cycle decomposition, fixed points included, each starting at its smallest id."""
        out = []
        for start in np.flatnonzero(self.labels == np.arange(len(self.image))):
            cyc = [int(start)]
            nxt = int(self.image[start])
            while nxt != start:
                cyc.append(nxt)
                nxt = int(self.image[nxt])
            out.append(tuple(self.domain[cyc].tolist()))
        return out

    @property
    def n_cycles(self) -> int:
        return int(np.count_nonzero(self.labels == np.arange(len(self.image))))

    @property
    def motion(self) -> int:
        return int(np.count_nonzero(self.image != np.arange(len(self.image))))

    @property
    def is_identity(self) -> bool:
        return self.motion == 0

    @property
    def moved(self) -> np.ndarray:
        return self.domain[self.image != np.arange(len(self.image))]

    def compose(self, other: "Permutation") -> "Permutation":
        """``self ∘ other`` (apply ``other`` first)."""
        if not np.array_equal(self.domain, other.domain):
            raise ValueError("domains differ")
        return Permutation(self.domain, self.image[other.image])

    def inverse(self) -> "Permutation":
        inv = np.empty_like(self.image)
        inv[self.image] = np.arange(len(self.image))
        return Permutation(self.domain, inv)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Permutation):
            return NotImplemented
        return np.array_equal(self.domain, other.domain) and np.array_equal(self.image, other.image)

    def __hash__(self):
        return hash((self.domain.tobytes(), self.image.tobytes()))

    def __repr__(self) -> str:
        nontrivial = [c for c in self.cycles if len(c) > 1] if len(self.image) <= 64 else "..."
        return f"Permutation(n={len(self.image)}, cycles={nontrivial})"

    def to_json(self) -> dict[str, int]:
        return {str(k): v for k, v in self.mapping.items()}

    @classmethod
    def from_json(cls, data: Mapping[str, int]) -> "Permutation":
        return cls.from_mapping({int(k): int(v) for k, v in data.items()})


class PermSet:
    """Distinct permutations of one domain, stored as canonical rows.

    ``images[i, j]`` is the domain position that element ``i`` sends the
    ``j``-th domain vertex to.  Rows are kept sorted and deduplicated.
    """

    def __init__(self, domain, images, *, closed: bool = False, cap: int = DEFAULT_CAP,
                 canonical: bool = False, validate: bool = False, owned: bool = False):
        self.domain = np.asarray(domain, dtype=np.int64)
        n = len(self.domain)
        images = np.asarray(images)
        if images.size == 0:
            images = images.reshape(0, n)
        dtype = np.int32 if n < 2**31 else np.int64
        if images.dtype != dtype:
            images = images.astype(dtype)
            owned = True
        if images.ndim != 2 or images.shape[1] != n:
            raise ValueError("images must have one column per domain vertex")
        if validate:
            check = np.sort(images, axis=1)
            if not (check == np.arange(n)).all():
                raise ValueError("some row is not a bijection of the domain")
        if not canonical:
            images = _canonical(images, inplace=owned)
        self._store = images
        self._rows = None          # row view into a shared store, or None for all rows
        self.closed = closed
        self.cap = cap

    @classmethod
    def _view(cls, parent: "PermSet", rows: np.ndarray, closed: bool) -> "PermSet":
        obj = cls.__new__(cls)
        obj.domain = parent.domain
        obj._store = parent._store
        obj._rows = rows if parent._rows is None else parent._rows[rows]
        obj.closed = closed
        obj.cap = parent.cap
        return obj

    @property
    def images(self) -> np.ndarray:
        """Image matrix; row views are materialized on access, so prefer ``take``."""
        if self._rows is None:
            return self._store
        return self._store[self._rows]

    def take(self, cols) -> np.ndarray:
        """Columns ``cols`` (slice or index array) of the image matrix, without copying all rows."""
        if self._rows is None:
            return self._store[:, cols]
        if isinstance(cols, slice) or np.ndim(cols) == 0:
            return self._store[self._rows, cols]
        return self._store[np.ix_(self._rows, np.asarray(cols))]

    def row(self, i: int) -> np.ndarray:
        return self._store[i if self._rows is None else self._rows[i]]

    # construction helpers

    @classmethod
    def from_permutations(cls, perms: Iterable[Permutation], domain=None, **kw) -> "PermSet":
        perms = list(perms)
        if domain is None:
            if not perms:
                raise ValueError("domain required for an empty set")
            domain = perms[0].domain
        domain = np.asarray(domain, dtype=np.int64)
        rows = []
        for p in perms:
            if not np.array_equal(p.domain, domain):
                raise ValueError("permutations act on different domains")
            rows.append(p.image)
        images = np.array(rows, dtype=np.int64).reshape(len(rows), len(domain))
        return cls(domain, images, **kw)

    @classmethod
    def from_mappings(cls, mappings: Iterable[Mapping[int, int]], **kw) -> "PermSet":
        return cls.from_permutations([Permutation.from_mapping(m) for m in mappings], **kw)

    @classmethod
    def empty(cls, domain) -> "PermSet":
        domain = np.asarray(domain, dtype=np.int64)
        return cls(domain, np.zeros((0, len(domain)), dtype=np.int64), canonical=True)

    def subset(self, mask_or_index, closed: bool = False) -> "PermSet":
        """Rows selected by a boolean mask or an increasing index array (stays canonical)."""
        sel = np.asarray(mask_or_index)
        if sel.dtype == bool:
            sel = np.flatnonzero(sel)
        return PermSet._view(self, sel.astype(np.int64, copy=False), closed)

    # container protocol

    def __len__(self) -> int:
        return self._store.shape[0] if self._rows is None else len(self._rows)

    def __getitem__(self, i) -> Permutation:
        return Permutation(self.domain, self.row(i))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __contains__(self, p: Permutation) -> bool:
        return self.index(p) is not None

    def index(self, p: Permutation):
        if not np.array_equal(p.domain, self.domain) or len(self) == 0:
            return None
        hit = np.flatnonzero((self.images == p.image).all(axis=1))
        return int(hit[0]) if hit.size else None

    def __eq__(self, other) -> bool:
        if not isinstance(other, PermSet):
            return NotImplemented
        return np.array_equal(self.domain, other.domain) and np.array_equal(self.images, other.images)

    __hash__ = None

    def __repr__(self) -> str:
        return f"PermSet(size={len(self)}, domain={len(self.domain)}, closed={self.closed})"

    @property
    def size(self) -> int:
        return len(self)

    def positions(self, ids) -> np.ndarray:
        return _positions(self.domain, ids)

    # per-element quantities

    def identity_mask(self) -> np.ndarray:
        out = np.ones(len(self), dtype=bool)
        n = len(self.domain)
        for c0 in range(0, n, _COL_CHUNK):
            c1 = min(n, c0 + _COL_CHUNK)
            out &= (self.take(slice(c0, c1)) == np.arange(c0, c1)).all(axis=1)
        return out

    def nontrivial(self) -> "PermSet":
        return self.subset(~self.identity_mask())

    def motions(self, ids=None) -> np.ndarray:
        """Number of moved vertices per element, optionally counted only inside ``ids``."""
        cols = np.arange(len(self.domain)) if ids is None else self.positions(np.sort(np.asarray(ids)))
        out = np.zeros(len(self), dtype=np.int64)
        for c0 in range(0, len(cols), _COL_CHUNK):
            c = cols[c0:c0 + _COL_CHUNK]
            out += np.count_nonzero(self.take(c) != c, axis=1)
        return out

    def fixes(self, v) -> np.ndarray:
        p = self.positions(v)
        return self.take(p) == p

    def moves_any(self, ids) -> np.ndarray:
        return self.motions(ids) > 0

    def is_closed(self) -> bool:
        """Exhaustive closure test: all pairwise compositions and inverses are members."""
        if len(self) == 0:
            return True
        lookup = _RowLookup(self.images)
        inv = np.empty_like(self.images)
        rows = np.arange(len(self))[:, None]
        inv[rows, self.images] = np.arange(len(self.domain))
        if not lookup.contains_all(inv):
            return False
        for i in range(len(self)):
            comp = self.images[i][self.images]  # element i applied after each element
            if not lookup.contains_all(comp):
                return False
        return True

    # serialization

    def to_json(self) -> list[dict[str, int]]:
        return [p.to_json() for p in self]

    @classmethod
    def from_json(cls, data, domain=None) -> "PermSet":
        perms = [Permutation.from_json(d) for d in data]
        return cls.from_permutations(perms, domain=domain)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=False)


class _RowLookup:
    def __init__(self, rows: np.ndarray):
        self.rows = rows
        self.keys = {r.tobytes() for r in rows}

    def contains_all(self, other: np.ndarray) -> bool:
        other = other.astype(self.rows.dtype, copy=False)
        return all(r.tobytes() in self.keys for r in other)


def _canonical(images: np.ndarray, inplace: bool = False) -> np.ndarray:
    if len(images) <= 1:
        return images
    index, _ = lex_unique(images)
    if len(index) == len(images):
        if np.array_equal(index, np.arange(len(index))):
            return images
        if inplace and images.flags.writeable and images.base is None:
            for c0 in range(0, images.shape[1], _COL_CHUNK):
                images[:, c0:c0 + _COL_CHUNK] = images[index, c0:c0 + _COL_CHUNK]
            return images
    return images[index]


# ---------------------------------------------------------------------------
# operations


def stabilizer(A: PermSet, v: int) -> PermSet:
    """Elements of ``A`` fixing the vertex ``v``."""
    return A.subset(A.fixes(v), closed=A.closed)


def _restriction_lookup(domain: np.ndarray, S) -> tuple[np.ndarray, np.ndarray]:
    S = np.unique(np.asarray(list(S) if not isinstance(S, np.ndarray) else S, dtype=np.int64))
    pos = _positions(domain, S)
    lookup = np.full(len(domain), -1, dtype=np.int64)
    lookup[pos] = np.arange(len(S))
    return S, pos, lookup


def restrict(phi: Permutation, S) -> Permutation:
    """The bijection that ``phi`` induces on the set ``S`` (which it must fix setwise)."""
    S, pos, lookup = _restriction_lookup(phi.domain, S)
    img = lookup[phi.image[pos]]
    if np.any(img < 0):
        raise NotSetwiseFixed("permutation does not fix the set setwise")
    return Permutation(S, img)


def restrict_set(A: PermSet, S) -> PermSet:
    """``A|S``: restrictions to ``S``, with duplicates removed."""
    S, pos, lookup = _restriction_lookup(A.domain, S)
    img = lookup[A.take(pos)]
    bad = np.flatnonzero((img < 0).any(axis=1))
    if bad.size:
        err = NotSetwiseFixed(f"{bad.size} element(s) do not fix the set setwise")
        err.offending = bad.tolist()
        raise err
    return PermSet(S, img, cap=A.cap)


def motion(phi: Permutation) -> int:
    return phi.motion


def restricted_motion(phi: Permutation, S) -> int:
    pos = _positions(phi.domain, np.unique(np.asarray(list(S) if not isinstance(S, np.ndarray) else S)))
    return int(np.count_nonzero(phi.image[pos] != pos))


def group_motion(A: PermSet, S=None):
    """Minimal (restricted) motion over the elements of ``A``; ``math.inf`` if ``A`` is empty."""
    if len(A) == 0:
        return math.inf
    if S is not None:
        S = np.unique(np.asarray(list(S) if not isinstance(S, np.ndarray) else S, dtype=np.int64))
    return int(A.motions(S).min())


def motion_by_groups(A: PermSet, labels: np.ndarray, n_groups: int | None = None) -> np.ndarray:
    """Moved-vertex counts per element and per group.

    ``labels[j]`` assigns domain position ``j`` to a group (negative values
    are ignored).  Returns an ``(len(A), n_groups)`` integer matrix.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if n_groups is None:
        n_groups = int(labels.max()) + 1 if labels.size and labels.max() >= 0 else 0
    out = np.zeros((len(A), n_groups), dtype=np.int64)
    keep = np.flatnonzero(labels >= 0)
    if len(A) == 0 or keep.size == 0:
        return out
    for c0 in range(0, keep.size, _COL_CHUNK):
        c = keep[c0:c0 + _COL_CHUNK]
        moved = (A.take(c) != c).astype(np.int32)
        onehot = sparse.csr_matrix((np.ones(len(c), dtype=np.int32), (np.arange(len(c)), labels[c])),
                                   shape=(len(c), n_groups))
        out += np.asarray(onehot.T.dot(moved.T).T)
    return out


def random_permset(rng: np.random.Generator, n_points: int, n_elements: int, domain=None) -> PermSet:
    """``n_elements`` uniform random permutations of ``n_points`` (duplicates collapse)."""
    domain = np.arange(n_points) if domain is None else np.asarray(domain, dtype=np.int64)
    images = rng.permuted(np.tile(np.arange(n_points), (n_elements, 1)), axis=1)
    return PermSet(domain, images, owned=True)
