import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from symbreak.designs import base_swap_example
from symbreak.automorphisms import automorphisms
from symbreak.errors import (CeilingExceeded, ConfigError, GrowthRefusal, SearchFailure, TooFewUncolored,
                             TruncationTooShallow)
from symbreak.layered import LayeredGraph, generate
from symbreak.motion import surviving_mask
from symbreak.perms import PermSet
from symbreak.scheme import (SchemeParams, block_arithmetic, choose_k, classify, compute_blocks,
                             effective_constant, fixroot, inequalities, run_pipeline, scheme_step,
                             verify_block_bounds, window_sparsity_ok)


def admissible(k, ct, e):
    r = math.sqrt(k)
    return (math.log2(ct) < e * r / 8 and math.log2(k) < e * r / 8
            and 4 * r < e * (1 - e / 2) * k / 2 and ct * r / 2 < e * k / 4)


def oracle_choose_k(ct, e, k0=0):
    k = k0 + 1
    while not admissible(k, ct, e):
        k += 1
    return k


@pytest.mark.parametrize("ct,eps,expected", [(4.0, 0.5, 65537), (1.0, 0.9, 15261)])
def test_choose_k_frozen(ct, eps, expected):
    assert choose_k(ct, eps) == expected


@pytest.mark.parametrize("ct,eps", [(1.0, 0.9), (2.0, 0.8), (4.0, 0.7), (30.0, 0.9), (300.0, 0.95)])
def test_choose_k_matches_linear_scan(ct, eps):
    assert choose_k(ct, eps) == oracle_choose_k(ct, eps)


def test_choose_k_respects_k0():
    base = choose_k(1.0, 0.9)
    assert choose_k(1.0, 0.9, k0=base) == oracle_choose_k(1.0, 0.9, k0=base) > base


def test_choose_k_ceiling():
    with pytest.raises(CeilingExceeded) as exc:
        choose_k(4.0, 0.5, ceiling=1000)
    assert "log" in exc.value.failing


@pytest.mark.parametrize("bad", [dict(c_tilde=0.0, epsilon=0.5), dict(c_tilde=1.0, epsilon=1.0),
                                 dict(c_tilde=1.0, epsilon=0.5, k0=-1)])
def test_choose_k_rejects(bad):
    with pytest.raises(ConfigError):
        choose_k(**bad)


def test_inequality_names():
    assert set(inequalities(100, 2.0, 0.5)) == {"constant", "log", "blocks", "sphere"}


def test_effective_constant():
    assert effective_constant(3.0, 0, 0.5) == 3.0
    assert effective_constant(1.0, 64, 0.5) == pytest.approx(2.0 ** 2)


@pytest.mark.parametrize("k,kappa,r,remainder", [(2500, 75, 14, 1525), (10000, 150, 26, 6250)])
def test_block_arithmetic_hand_values(k, kappa, r, remainder):
    out = block_arithmetic(k, 0.5)
    assert (out["kappa"], out["r"], out["remainder"]) == (kappa, r, remainder)
    assert out["holds"] and out["remainder"] > 0.25 * 0.75 * k


@given(st.integers(100, 10**6), st.floats(0.05, 0.95))
def test_block_arithmetic_remainder_positive_for_admissible_k(k, eps):
    if admissible(k, 1.0, eps):
        assert block_arithmetic(k, eps)["holds"]


def test_window_sparsity():
    assert window_sparsity_ok([1, 9, 17], 0.25, 8, 30)
    assert not window_sparsity_ok([1, 2, 3], 0.25, 0, 30)


# -- blocks and classes on a hand-made layered graph ------------------------------

WIDTH = 6
K = 40   # eps = 0.5: kappa = 10, r = 3, last block holds 20 spheres


def wide_path(radius):
    """Spheres of WIDTH vertices, each hanging from the first vertex of the previous sphere."""
    sizes = [1] + [WIDTH] * radius
    off = np.concatenate([[0], np.cumsum(sizes)])
    edges = [(off[n - 1], off[n] + j) for n in range(1, radius + 1) for j in range(WIDTH)]
    return LayeredGraph(np.arange(off[-1]), off, np.array(edges))


def sphere_preserving(rng, g, n_elements, p_move):
    rows = np.tile(np.arange(g.n_vertices), (n_elements, 1))
    for e in range(n_elements):
        for n in range(1, g.radius + 1):
            if rng.random() < p_move:
                s = g.offsets[n]
                rows[e, s:s + WIDTH] = s + rng.permutation(WIDTH)
    return PermSet(g.ids, rows)


def brute_classes(A, plan):
    spheres = [j for b in plan.blocks for j in b]
    block_of = {j: i + 1 for i, b in enumerate(plan.blocks) for j in b}
    out = []
    for phi in A:
        mot = {j: sum(1 for v in plan.sphere_vertices[j] if phi(v) != v) for j in spheres}
        cls = plan.r
        for i in range(1, plan.r):
            if any(mot[j] <= 2**i for j in spheres if block_of[j] > i):
                cls = i
                break
        own = [mot[j] for j in plan.blocks[cls - 1]]
        out.append(0 if max(own) == 0 else cls)
    return out


def test_compute_blocks_shape():
    g = wide_path(50)
    plan = compute_blocks(g, SchemeParams(0.5, 1.0, 0, 1.0, K), colored={5})
    assert plan.kappa == 10 and plan.r == 3
    assert plan.uncolored == [j for j in range(1, 41) if j != 5]
    assert [len(b) for b in plan.blocks] == [10, 10, 19]
    assert plan.blocks[0][0] == 1 and 5 not in plan.blocks[0]


def test_compute_blocks_errors():
    g = wide_path(30)
    with pytest.raises(TruncationTooShallow):
        compute_blocks(g, SchemeParams(0.5, 1.0, 0, 1.0, K))
    with pytest.raises(TooFewUncolored):
        compute_blocks(wide_path(50), SchemeParams(0.5, 1.0, 0, 1.0, K), colored=set(range(1, 30)))


@given(st.integers(0, 2**31), st.floats(0.02, 0.6))
def test_classify_matches_brute(seed, p_move):
    rng = np.random.default_rng(seed)
    g = wide_path(41)
    A = sphere_preserving(rng, g, 12, p_move)
    plan = compute_blocks(g, SchemeParams(0.5, 1.0, 0, 1.0, K))
    part = classify(A, plan)
    assert part.membership.tolist() == brute_classes(A, plan)
    # classes are disjoint and, with the excluded ones, cover A
    assert sum(part.sizes) + len(part.excluded) == len(A)


def test_scheme_step_breaks_targets():
    rng = np.random.default_rng(7)
    g = wide_path(41)
    A = sphere_preserving(rng, g, 30, 0.9).nontrivial()
    params = SchemeParams(0.5, 1.0, 0, 1.0, K)
    step = scheme_step(g, A, params, seed=3)
    part = step.partition
    for cls in part.classes:
        assert not surviving_mask(step.coloring, cls).any()
    rec = step.record
    assert rec["kappa"] == 10 and rec["r"] == 3 and sum(rec["class_sizes"]) == len(A) - rec["excluded"]
    assert {"class", "motion", "two_log_size"} <= set(rec["bound_margins"][0])
    for row in verify_block_bounds(part, step.plan, params):
        assert row["restricted_size"] <= row["size"]


def test_fixroot_base_swap():
    g = base_swap_example()
    A = automorphisms(g)
    movers = A.subset(~A.fixes(g.base))
    fr = fixroot(g, movers, 0.25, seed=0)
    assert fr.colored == [1] and fr.k0 == 8
    assert not surviving_mask(fr.coloring, movers).any()


def test_fixroot_empty():
    g = generate("line", 4)
    assert len(fixroot(g, PermSet.empty(g.ids), 0.5).coloring) == 0


def test_pipeline_grid_radius_25():
    col, rep = run_pipeline(generate("grid2d", 25), 0.9, seed=1)
    assert rep["iterations"] == [] and rep["stop"]["next_k"] == 5910369
    assert rep["verification"] == {"m_cov": 0, "checked": 0, "unchecked": 7, "survivors": []}


def test_pipeline_base_swap():
    col, rep = run_pipeline(base_swap_example(), 0.5, seed=0)
    assert col.to_dict() == {"support": [1, 2, 3, 4], "black": [1, 3, 4]}
    assert rep["verification"]["checked"] == 1 and rep["verification"]["survivors"] == []


def test_pipeline_trivial_group():
    # legs of lengths 1, 2 and 3 at the base: no symmetry at all
    g = LayeredGraph.from_spheres([[0], [1, 2, 3], [4, 5], [6]], [(0, 1), (0, 2), (0, 3), (2, 4), (3, 5), (5, 6)])
    col, rep = run_pipeline(g, 0.5)
    assert rep["trivial"] and len(col) == 0


def test_pipeline_reports_unbreakable_base_mover():
    # the end swap of a 3-vertex path fixes sphere 1, the only sphere fixroot may use
    g = LayeredGraph.from_spheres([[0], [1], [2]], [(0, 1), (1, 2)])
    with pytest.raises(SearchFailure):
        run_pipeline(g, 0.5)


def test_pipeline_growth_refusal():
    with pytest.raises(GrowthRefusal) as exc:
        run_pipeline(generate("tree:3", 8), 0.5, c=50)
    assert exc.value.first_failure == 5
    col, rep = run_pipeline(generate("tree:3", 2), 0.5, c=1, force=True)
    assert not rep["growth"]["passed"]
