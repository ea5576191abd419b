"""Counting and search machinery around preserved 2-colourings.

A permutation preserves a partial colouring exactly when the colouring is
constant on every cycle intersected with the support.  Each permutation
therefore reduces to a *rep* row: for every support vertex, the smallest
support position in its cycle class.  Everything below works on distinct
rep rows.

Colourings over a support sorted by id are encoded as integers, first
vertex in the most significant bit, 0 for black and 1 for white.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, IdentityOnSupport, SearchFailure
from .perms import PermSet, Permutation, cycle_labels, lex_unique, random_permset, restrict_set

__all__ = [
    "PartialColoring",
    "BoundCheck",
    "DoubleCount",
    "SearchStats",
    "preserved_count",
    "double_count_check",
    "bound_check",
    "preserves_partial",
    "support_reps",
    "find_breaking_coloring",
    "search_coloring",
    "verify_breaks",
    "surviving_mask",
    "sample_failures",
    "bound_instances",
]

EXHAUSTIVE_LIMIT = 20
ENUMERATION_LIMIT = 16


@dataclass(frozen=True)
class PartialColoring:
    """Two colours on an explicit support; ``white[i]`` refers to ``support[i]``."""

    support: np.ndarray
    white: np.ndarray

    def __post_init__(self):
        support = np.asarray(self.support, dtype=np.int64)
        white = np.asarray(self.white, dtype=bool)
        if support.shape != white.shape:
            raise ValueError("one colour per support vertex required")
        order = np.argsort(support, kind="stable")
        support, white = support[order], white[order]
        if np.any(support[1:] == support[:-1]):
            raise ValueError("support has repeated vertices")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "white", white)

    @classmethod
    def empty(cls) -> "PartialColoring":
        return cls(np.zeros(0, np.int64), np.zeros(0, bool))

    @classmethod
    def from_sets(cls, support: Iterable[int], black: Iterable[int]) -> "PartialColoring":
        support = np.array(sorted(int(v) for v in support), dtype=np.int64)
        black = np.array(sorted(int(v) for v in black), dtype=np.int64)
        if not np.isin(black, support).all():
            raise ValueError("black vertices must lie in the support")
        return cls(support, ~np.isin(support, black))

    @classmethod
    def from_code(cls, support, code: int) -> "PartialColoring":
        support = np.sort(np.asarray(support, dtype=np.int64))
        p = len(support)
        bits = np.array([(code >> (p - 1 - j)) & 1 for j in range(p)], dtype=bool)
        return cls(support, bits)

    @property
    def black(self) -> np.ndarray:
        return self.support[~self.white]

    @property
    def colors(self) -> dict[int, str]:
        return {int(v): ("white" if w else "black") for v, w in zip(self.support, self.white)}

    def __len__(self) -> int:
        return len(self.support)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PartialColoring):
            return NotImplemented
        return np.array_equal(self.support, other.support) and np.array_equal(self.white, other.white)

    __hash__ = None

    def merge(self, other: "PartialColoring") -> "PartialColoring":
        """Union of two colourings that agree where their supports overlap."""
        both = np.intersect1d(self.support, other.support)
        if both.size:
            a = self.white[np.searchsorted(self.support, both)]
            b = other.white[np.searchsorted(other.support, both)]
            if not np.array_equal(a, b):
                raise ValueError("colourings disagree on a shared vertex")
        keep = ~np.isin(other.support, both)
        return PartialColoring(np.concatenate([self.support, other.support[keep]]),
                               np.concatenate([self.white, other.white[keep]]))

    def to_dict(self) -> dict:
        return {"support": self.support.tolist(), "black": self.black.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "PartialColoring":
        return cls.from_sets(data["support"], data["black"])

    @classmethod
    def from_json(cls, text: str) -> "PartialColoring":
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# counting


def preserved_count(phi: Permutation) -> int:
    """2^(number of cycles): the number of 2-colourings of the domain that ``phi`` preserves."""
    return 2 ** phi.n_cycles


def _all_colorings(p: int) -> np.ndarray:
    codes = np.arange(2**p, dtype=np.int64)
    return ((codes[:, None] >> (p - 1 - np.arange(p))) & 1).astype(np.int8)


@dataclass(frozen=True)
class DoubleCount:
    lhs: int
    rhs: int

    @property
    def equal(self) -> bool:
        return self.lhs == self.rhs

    def __iter__(self):
        return iter((self.lhs, self.rhs))


def double_count_check(A: PermSet, limit: int = ENUMERATION_LIMIT) -> DoubleCount:
    """Count (element, preserved colouring) pairs both ways over the domain of ``A``."""
    p = len(A.domain)
    if p > limit:
        raise ConfigError(f"support of size {p} exceeds the enumeration limit {limit}")
    lhs = sum(preserved_count(phi) for phi in A)
    X = _all_colorings(p)
    rhs = 0
    for row in A.images:
        rhs += int(np.count_nonzero((X[:, row] == X).all(axis=1)))
    return DoubleCount(int(lhs), rhs)


@dataclass(frozen=True)
class BoundCheck:
    group_motion: float
    set_size: int
    threshold: float
    holds: bool

    def to_dict(self) -> dict:
        gm = self.group_motion
        return {"group_motion": gm if math.isfinite(gm) else None, "set_size": self.set_size,
                "threshold": self.threshold, "holds": self.holds}


def bound_check(A: PermSet, S) -> BoundCheck:
    """Compare m(A)|S with 2 log2 |A|S|."""
    R = restrict_set(A, S)
    if len(R) == 0:
        return BoundCheck(math.inf, 0, 0.0, True)
    ident = R.identity_mask()
    if ident.any():
        # name the original elements whose restriction is trivial
        offending = np.flatnonzero(A.motions(S) == 0).tolist()
        raise IdentityOnSupport("some element acts as the identity on the support", offending)
    gm = int(R.motions().min())
    thr = 2.0 * math.log2(len(R))
    return BoundCheck(gm, len(R), thr, gm > thr)


# ---------------------------------------------------------------------------
# reps and preservation


def _as_ids(S) -> np.ndarray:
    if isinstance(S, PartialColoring):
        return S.support
    return np.unique(np.asarray(list(S) if not isinstance(S, np.ndarray) else S, dtype=np.int64))


def support_reps(A: PermSet, S) -> np.ndarray:
    """Per element and support position, the smallest support position in the same cycle class."""
    S = _as_ids(S)
    p = len(S)
    out = np.empty((len(A), p), dtype=np.int64)
    if len(A) == 0 or p == 0:
        return out
    pos = A.positions(S)
    lookup = np.full(len(A.domain), -1, dtype=np.int64)
    lookup[pos] = np.arange(p)
    local = lookup[A.take(pos)]
    fixed = (local >= 0).all(axis=1)
    if fixed.any():
        out[fixed] = cycle_labels(local[fixed])
    for i in np.flatnonzero(~fixed):
        lab = cycle_labels(A.row(i))[pos]
        _, first, inv = np.unique(lab, return_index=True, return_inverse=True)
        out[i] = first[inv.reshape(-1)]
    return out


def _reps_of(phi: Permutation, S) -> np.ndarray:
    A = PermSet(phi.domain, phi.image[None, :], canonical=True)
    return support_reps(A, S)[0]


def preserves_partial(phi: Permutation, c: PartialColoring) -> bool:
    """True iff ``c`` extends to a full colouring preserved by ``phi``."""
    if len(c) == 0:
        return True
    rep = _reps_of(phi, c.support)
    return bool(np.array_equal(c.white[rep], c.white))


def surviving_mask(c: PartialColoring, A: PermSet) -> np.ndarray:
    if len(A) == 0:
        return np.zeros(0, dtype=bool)
    if len(c) == 0:
        return np.ones(len(A), dtype=bool)
    out = np.empty(len(A), dtype=bool)
    step = max(1, 2_000_000 // max(len(c), 1))
    for r0 in range(0, len(A), step):
        reps = support_reps(A.subset(np.arange(r0, min(len(A), r0 + step))), c.support)
        out[r0:r0 + step] = (c.white[reps] == c.white).all(axis=1)
    return out


def verify_breaks(c: PartialColoring, A: PermSet) -> PermSet:
    """Elements of ``A`` that preserve ``c``; empty means ``c`` breaks all of ``A``."""
    return A.subset(surviving_mask(c, A))


# ---------------------------------------------------------------------------
# search


@dataclass
class SearchStats:
    strategy: str
    tries: int
    distinct: int
    support: int
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"strategy": self.strategy, "tries": self.tries, "distinct": self.distinct, "support": self.support}
        d.update(self.extra)
        return d


def _distinct_reps(A: PermSet, S: np.ndarray) -> np.ndarray:
    reps = support_reps(A, S)
    if len(reps) <= 1:
        return reps
    idx, _ = lex_unique(reps)
    return reps[idx]


def _exhaustive(reps: np.ndarray, p: int) -> int | None:
    marked = np.zeros(2**p, dtype=bool)
    bits = (1 << (p - 1 - np.arange(p))).astype(np.int64)
    for rep in reps:
        labels, inv = np.unique(rep, return_inverse=True)
        masks = np.bincount(inv.reshape(-1), weights=bits, minlength=len(labels)).astype(np.int64)
        codes = np.zeros(1, dtype=np.int64)
        for m in masks:
            codes = np.concatenate([codes, codes | m])
        marked[codes] = True
    free = np.flatnonzero(~marked)
    return int(free[0]) if free.size else None


def _preserved_any(samples: np.ndarray, reps: np.ndarray) -> np.ndarray:
    """For each sample colouring (rows of 0/1), whether some rep row preserves it."""
    out = np.zeros(len(samples), dtype=bool)
    chunk = max(1, 4_000_000 // max(reps.size, 1))
    for b, x in enumerate(samples):
        for r0 in range(0, len(reps), chunk):
            r = reps[r0:r0 + chunk]
            if (x[r] == x).all(axis=1).any():
                out[b] = True
                break
    return out


def _randomized(reps: np.ndarray, p: int, seed, stream, max_tries: int, batch: int = 16):
    rng = np.random.default_rng([int(seed), *(int(s) for s in stream)])
    tries = 0
    while tries < max_tries:
        n = min(batch, max_tries - tries)
        X = rng.integers(0, 2, size=(n, p), dtype=np.int8)
        bad = _preserved_any(X, reps)
        ok = np.flatnonzero(~bad)
        if ok.size:
            return X[ok[0]].astype(bool), tries + int(ok[0]) + 1
        tries += n
    return None, tries


def search_coloring(A: PermSet, S, strategy: str = "auto", *, seed: int = 0, stream: Sequence[int] = (),
                    max_tries: int = 10_000, force: bool = False,
                    exhaustive_limit: int = EXHAUSTIVE_LIMIT) -> tuple[PartialColoring, SearchStats]:
    """Find a colouring with support ``S`` preserved by no element of ``A``.

    ``strategy`` is ``"exhaustive"``, ``"randomized"`` or ``"auto"`` (exhaustive
    up to ``exhaustive_limit`` support vertices).  Unless ``force`` is set the
    motion bound must hold first.  Randomized draws come from a generator
    seeded with ``[seed, *stream]``.
    """
    S = _as_ids(S)
    p = len(S)
    if len(A) == 0:
        return PartialColoring(S, np.zeros(p, dtype=bool)), SearchStats("none", 0, 0, p)
    if not force:
        check = bound_check(A, S)
        if not check.holds:
            raise SearchFailure("motion bound does not hold; pass force=True to search anyway",
                                {"bound": check.to_dict()})
    reps = _distinct_reps(A, S)
    if strategy == "auto":
        strategy = "exhaustive" if p <= exhaustive_limit else "randomized"
    if strategy == "exhaustive":
        if p > max(exhaustive_limit, 24):
            raise ConfigError(f"exhaustive search over {p} vertices is not supported")
        code = _exhaustive(reps, p)
        stats = SearchStats("exhaustive", 0 if code is None else code + 1, len(reps), p)
        if code is None:
            raise SearchFailure("no colouring of the support breaks every element", stats.to_dict())
        return PartialColoring.from_code(S, code), stats
    if strategy == "randomized":
        white, tries = _randomized(reps, p, seed, stream, max_tries)
        stats = SearchStats("randomized", tries, len(reps), p)
        if white is None:
            raise SearchFailure(f"no breaking colouring in {tries} random tries", stats.to_dict())
        return PartialColoring(S, white), stats
    raise ConfigError(f"unknown strategy {strategy!r}")


def find_breaking_coloring(A: PermSet, S, strategy: str = "auto", **kw) -> PartialColoring:
    return search_coloring(A, S, strategy, **kw)[0]


def sample_failures(A: PermSet, S, trials: int, seed: int = 0) -> tuple[int, float]:
    """Draw ``trials`` uniform colourings of ``S``; count those preserved by some element.

    Returns the count and the per-try failure bound |A|S|·2^(-m/2).
    """
    S = _as_ids(S)
    check = bound_check(A, S)
    reps = _distinct_reps(A, S)
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 2, size=(trials, len(S)), dtype=np.int8)
    failures = int(_preserved_any(X, reps).sum())
    bound = check.set_size * 2.0 ** (-check.group_motion / 2.0) if check.set_size else 0.0
    return failures, bound


def bound_instances(rng: np.random.Generator, count: int, max_points: int = ENUMERATION_LIMIT,
                    min_points: int = 4):
    """Yield ``count`` random ``(A, S)`` pairs on which the motion bound holds.

    Elements are random permutations of a domain of size ``p``; the support
    is the whole domain.  Rejected draws are simply redrawn.
    """
    made = 0
    while made < count:
        p = int(rng.integers(min_points, max_points + 1))
        size = int(rng.integers(1, max(2, 2 ** (p // 4)) + 1))
        A = random_permset(rng, p, size)
        S = A.domain
        if (A.motions() == 0).any():
            continue
        if bound_check(A, S).holds:
            made += 1
            yield A, S
