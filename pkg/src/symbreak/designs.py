"""Hand-built layered graphs with prescribed symmetry.

These are the synthetic instances used to exercise parts of the toolkit
that natural families leave idle: classes with different motion
thresholds, finite-motion automorphisms, and automorphisms moving the base.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .layered import LayeredGraph

__all__ = ["strand_spider", "finite_motion_example", "base_swap_example", "spider_radius"]


def strand_spider(radius: int, deep: int = 3, shallow: Sequence[tuple[int, int]] = ((5, 10), (2, 11))) -> LayeredGraph:
    """Paths ("strands") glued at a common base vertex.

    ``deep`` strands run out to the truncation radius; ``shallow`` lists
    ``(count, length)`` groups of shorter pendant strands.  The automorphism
    group is Sym(deep) x prod Sym(count) as long as the lengths differ from
    each other and from ``radius``.  Permuting deep strands moves vertices in
    every sphere; permuting shallow strands only moves the first spheres.
    Vertex ids follow sphere order, strands in declaration order.
    """
    lengths = [radius] * deep + [L for cnt, L in shallow for _ in range(cnt)]
    if any(L > radius for L in lengths):
        raise ValueError("shallow strands must fit inside the truncation")
    lengths = np.array(lengths, dtype=np.int64)
    sizes = [1] + [int(np.count_nonzero(lengths >= n)) for n in range(1, radius + 1)]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    # strand s occupies consecutive slots among strands still alive at depth n
    parts = []
    for n in range(1, radius + 1):
        alive = np.flatnonzero(lengths >= n)
        here = offsets[n] + np.arange(len(alive))
        if n == 1:
            below = np.zeros(len(alive), dtype=np.int64)
        else:
            prev_alive = np.flatnonzero(lengths >= n - 1)
            below = offsets[n - 1] + np.searchsorted(prev_alive, alive)
        parts.append(np.stack([below, here], axis=1))
    edges = np.concatenate(parts) if parts else np.zeros((0, 2), np.int64)
    return LayeredGraph(np.arange(offsets[-1]), offsets, edges)


def spider_radius(k: int, margin: int = 1, slack: int = 10) -> int:
    """Truncation radius leaving room for one block iteration of depth ``k``."""
    return k + margin + slack


def finite_motion_example(spine: int = 8) -> LayeredGraph:
    """A path from the base with two pendant paths of length 3 hung at spine vertex 2.

    Swapping the pendant paths is an automorphism moving vertices only in
    spheres 3..5; it fixes everything in sphere 6 and beyond.
    """
    spheres = [[0]]
    edges = []
    for n in range(1, spine + 1):
        spheres.append([n])
        edges.append((n - 1, n))
    nxt = spine + 1
    for _ in range(2):
        prev = 2
        for depth in range(3, 6):
            spheres[depth].append(nxt)
            edges.append((prev, nxt))
            prev = nxt
            nxt += 1
    return LayeredGraph.from_spheres(spheres, edges)


def base_swap_example() -> LayeredGraph:
    """A 4-cycle base-u-x-w with tags that leave only the half-turn.

    e1 is adjacent to base and u, e2 to x and w; pendant vertices f1 and f2
    hang off base and x.  The only nontrivial automorphism is
    (base x)(u w)(e1 e2)(f1 f2), which moves the base; u and w both lie in
    sphere 1.
    """
    base, u, w, e1, f1, x, e2, f2 = range(8)
    spheres = [[base], [u, w, e1, f1], [x, e2], [f2]]
    edges = [(base, u), (base, w), (x, u), (x, w), (e1, base), (e1, u), (e2, x), (e2, w),
             (f1, base), (f2, x)]
    return LayeredGraph.from_spheres(spheres, edges)
