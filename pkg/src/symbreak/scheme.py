"""Sphere-block symmetry breaking on a layered truncation.

Starting from a sparse colouring that pins the base vertex, the scheme
repeatedly takes the next ``k`` spheres beyond the coloured region, cuts
their uncoloured members into blocks ``P_1 .. P_r`` and sorts the target
automorphisms into classes by how little they move inside later blocks.
Class ``A_i`` is then broken on block ``P_i`` with the motion engine.  The
depth ``k`` is the least integer satisfying four growth inequalities, which
is what makes the per-class motion bound hold in the worst case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .automorphisms import automorphisms
from .errors import (CeilingExceeded, ConfigError, GrowthRefusal, SearchFailure,
                     TooFewUncolored, TruncationTooShallow)
from .layered import GrowthBudget, LayeredGraph, growth_check
from .motion import PartialColoring, search_coloring, surviving_mask
from .perms import DEFAULT_CAP, PermSet, group_motion, motion_by_groups, restrict_set

__all__ = [
    "effective_constant",
    "inequalities",
    "choose_k",
    "block_arithmetic",
    "SchemeParams",
    "BlockPlan",
    "compute_blocks",
    "AutPartition",
    "classify",
    "prime_membership",
    "block_sphere_motion",
    "verify_block_bounds",
    "FixrootResult",
    "fixroot",
    "window_sparsity_ok",
    "scheme_step",
    "run_pipeline",
]

DEFAULT_CEILING = 10**8
INEQUALITY_NAMES = ("constant", "log", "blocks", "sphere")


def _check_eps(eps: float) -> None:
    if not 0.0 < eps < 1.0:
        raise ConfigError(f"epsilon must lie strictly between 0 and 1, got {eps}")


def effective_constant(c: float, m: int, epsilon: float) -> float:
    """c * 2^((1-eps) sqrt(m) / 2): the growth constant seen from sphere m outwards."""
    if m < 0:
        raise ConfigError("m must be non-negative")
    return float(c) * 2.0 ** ((1.0 - epsilon) * math.sqrt(m) / 2.0)


def inequalities(k, c_tilde: float, epsilon: float) -> dict:
    """Truth values of the four conditions on k (scalars or arrays).

    constant: log c~ < eps sqrt(k)/8
    log:      log k  < eps sqrt(k)/8
    blocks:   4 sqrt(k) < eps (1 - eps/2) k / 2
    sphere:   c~ sqrt(k)/2 < eps k / 4
    """
    k = np.asarray(k, dtype=float)
    r = np.sqrt(k)
    e = epsilon
    with np.errstate(divide="ignore"):
        return {
            "constant": math.log2(c_tilde) < e * r / 8.0,
            "log": np.log2(k) < e * r / 8.0,
            "blocks": 4.0 * r < 0.5 * e * (1.0 - e / 2.0) * k,
            "sphere": c_tilde * r / 2.0 < e * k / 4.0,
        }


def _analytic_start(c_tilde: float, eps: float) -> int:
    # the constant, blocks and sphere conditions are monotone in k; no k below
    # their joint threshold can satisfy all four
    roots = [8.0 / (eps * (1.0 - eps / 2.0)), 2.0 * c_tilde / eps]
    if c_tilde > 1:
        roots.append(8.0 * math.log2(c_tilde) / eps)
    lb = max(roots) ** 2
    return max(1, int(math.floor(lb)) - 2) if math.isfinite(lb) else DEFAULT_CEILING * 10


def choose_k(c_tilde: float, epsilon: float, k0: int = 0, ceiling: int = DEFAULT_CEILING,
             chunk: int = 1 << 16) -> int:
    """Smallest k > k0 meeting all four conditions, by a forward scan."""
    _check_eps(epsilon)
    if not c_tilde > 0:
        raise ConfigError("c_tilde must be positive")
    if k0 < 0:
        raise ConfigError("k0 must be non-negative")
    k = max(k0 + 1, _analytic_start(c_tilde, epsilon))
    while k <= ceiling:
        ks = np.arange(k, min(k + chunk, ceiling + 1))
        checks = inequalities(ks, c_tilde, epsilon)
        ok = np.logical_and.reduce([np.broadcast_to(v, ks.shape) for v in checks.values()])
        hit = np.flatnonzero(ok)
        if hit.size:
            return int(ks[hit[0]])
        k = int(ks[-1]) + 1
    at = inequalities(ceiling, c_tilde, epsilon)
    failing = tuple(name for name in INEQUALITY_NAMES if not bool(at[name]))
    raise CeilingExceeded(f"no admissible k up to {ceiling}; failing at the ceiling: {', '.join(failing)}",
                          failing)


def block_arithmetic(k: int, epsilon: float, l: int | None = None) -> dict:
    """Block width kappa, block count r and the remainder check for depth k."""
    l = k if l is None else l
    rk = math.sqrt(k)
    kappa = math.ceil(2.0 * rk * (1.0 - epsilon / 2.0))
    r = math.ceil((1.0 - epsilon) * rk / 2.0) + 1
    remainder = l - (r - 1) * kappa
    bound = (epsilon / 2.0) * (1.0 - epsilon / 2.0) * k
    return {"kappa": kappa, "r": r, "remainder": remainder, "remainder_bound": bound,
            "holds": remainder > bound}


@dataclass(frozen=True)
class SchemeParams:
    epsilon: float
    c: float
    m: int
    c_tilde: float
    k: int
    k0: int = 0
    delta: float | None = None

    @classmethod
    def derive(cls, epsilon: float, c: float, m: int, k0: int = 0, delta: float | None = None,
               k: int | None = None, ceiling: int = DEFAULT_CEILING) -> "SchemeParams":
        ct = effective_constant(c, m, epsilon)
        if k is None:
            k = choose_k(ct, epsilon, k0, ceiling)
        return cls(epsilon, c, m, ct, k, k0, delta)


@dataclass
class BlockPlan:
    m: int
    k: int
    uncolored: list
    kappa: int
    r: int
    blocks: list              # sphere indices per block, P_1 first
    vertices: list            # vertex ids per block
    sphere_vertices: dict     # sphere index -> ids counted for that sphere
    remainder: int
    remainder_bound: float

    @property
    def l(self) -> int:
        return len(self.uncolored)

    def to_dict(self) -> dict:
        return {"m": self.m, "k": self.k, "kappa": self.kappa, "r": self.r, "uncolored_count": self.l,
                "block_sizes": [len(b) for b in self.blocks], "remainder": self.remainder,
                "remainder_bound": self.remainder_bound}


def compute_blocks(g: LayeredGraph, params: SchemeParams, colored=(), vertex_filter=None) -> BlockPlan:
    """Cut the uncoloured spheres in (m, m+k] into blocks P_1 .. P_r.

    ``vertex_filter`` (a set of ids) restricts every sphere to its members;
    it is how the per-end variant confines blocks to one chain.
    """
    m, k, eps = params.m, params.k, params.epsilon
    if m + k > g.radius:
        raise TruncationTooShallow(f"spheres up to {m + k} needed, truncation radius is {g.radius}")
    colored = set(int(c) for c in colored)
    uncolored = [j for j in range(m + 1, m + k + 1) if j not in colored]
    l = len(uncolored)
    if l < (1.0 - eps) * k:
        raise TooFewUncolored(f"only {l} of {k} spheres are uncoloured")
    arith = block_arithmetic(k, eps, l)
    kappa, r = arith["kappa"], arith["r"]
    if not arith["holds"]:
        raise TooFewUncolored(f"last block keeps {arith['remainder']} spheres, "
                              f"needs more than {arith['remainder_bound']:.2f}")
    blocks = [uncolored[i * kappa:(i + 1) * kappa] for i in range(r - 1)]
    blocks.append(uncolored[(r - 1) * kappa:])
    keep = None
    if vertex_filter is not None:
        keep = np.unique(np.asarray(list(vertex_filter) if not isinstance(vertex_filter, np.ndarray)
                                    else vertex_filter, dtype=np.int64))
    sphere_vertices = {}
    for j in uncolored:
        ids = g.sphere(j)
        if keep is not None:
            ids = ids[np.isin(ids, keep)]
        sphere_vertices[j] = np.sort(ids)
    vertices = [np.concatenate([sphere_vertices[j] for j in b]) if b else np.zeros(0, np.int64) for b in blocks]
    return BlockPlan(m, k, uncolored, kappa, r, blocks, [np.sort(v) for v in vertices], sphere_vertices,
                     arith["remainder"], arith["remainder_bound"])


def _sphere_list(plan: BlockPlan) -> tuple[list, np.ndarray]:
    spheres = [j for b in plan.blocks for j in b]
    block_of = np.concatenate([np.full(len(b), i + 1, dtype=np.int64) for i, b in enumerate(plan.blocks)])
    return spheres, block_of


def block_sphere_motion(A: PermSet, plan: BlockPlan) -> tuple[np.ndarray, np.ndarray]:
    """Motion of each element on each uncoloured sphere of the plan, plus the block of each sphere."""
    spheres, block_of = _sphere_list(plan)
    labels = np.full(len(A.domain), -1, dtype=np.int64)
    for col, j in enumerate(spheres):
        ids = plan.sphere_vertices[j]
        if ids.size:
            labels[A.positions(ids)] = col
    return motion_by_groups(A, labels, len(spheres)), block_of


def _block_extremes(A: PermSet, plan: BlockPlan, chunk: int = 2048):
    """Per element and block: least and largest motion over the block's spheres."""
    spheres, block_of = _sphere_list(plan)
    lo = np.full((len(A), plan.r), np.iinfo(np.int64).max, dtype=np.int64)
    hi = np.zeros((len(A), plan.r), dtype=np.int64)
    lo_sphere = np.zeros((len(A), plan.r), dtype=np.int64)
    for s0 in range(0, len(spheres), chunk):
        part = spheres[s0:s0 + chunk]
        labels = np.full(len(A.domain), -1, dtype=np.int64)
        for col, j in enumerate(part):
            ids = plan.sphere_vertices[j]
            if ids.size:
                labels[A.positions(ids)] = col
        sm = motion_by_groups(A, labels, len(part))
        blk = block_of[s0:s0 + chunk] - 1
        for b in np.unique(blk):
            cols = np.flatnonzero(blk == b)
            sub = sm[:, cols]
            arg = sub.argmin(axis=1)
            cand = sub[np.arange(len(A)), arg]
            better = cand < lo[:, b]
            lo[better, b] = cand[better]
            lo_sphere[better, b] = np.asarray(part)[cols[arg[better]]]
            hi[:, b] = np.maximum(hi[:, b], sub.max(axis=1))
    return lo, hi, lo_sphere


def prime_membership(sphere_motion: np.ndarray, block_of: np.ndarray, i: int) -> np.ndarray:
    """Elements with some sphere in a block P_i', i' > i, moved at most 2^i times."""
    later = block_of > i
    if not later.any():
        return np.zeros(len(sphere_motion), dtype=bool)
    return (sphere_motion[:, later] <= 2**i).any(axis=1)


@dataclass
class AutPartition:
    classes: list                 # PermSet per class, A_1 first
    thresholds: list              # 2^i per class
    membership: np.ndarray        # class index (1-based) per input element, 0 if excluded
    excluded: list = field(default_factory=list)
    violations: list = field(default_factory=list)   # (element, class, sphere, motion)

    @property
    def sizes(self) -> list:
        return [len(c) for c in self.classes]


def classify(A: PermSet, plan: BlockPlan, g: LayeredGraph | None = None) -> AutPartition:
    """Sort ``A`` into A_1 .. A_r: the first i with a later-block sphere moved at most 2^i times.

    Elements that act trivially on every sphere of their own block cannot be
    broken there; they are reported in ``excluded`` and left out.  Elements
    moving some sphere of their own block A_i at most 2^(i-1) times (only
    possible for finite-motion elements in A_1) are listed in ``violations``.
    """
    r = plan.r
    if len(A) == 0:
        return AutPartition([A.subset(np.zeros(0, dtype=np.int64)) for _ in range(r)],
                            [2**i for i in range(1, r + 1)], np.zeros(0, dtype=np.int64))
    lo, hi, lo_sphere = _block_extremes(A, plan)
    cls = np.full(len(A), r, dtype=np.int64)
    undecided = np.ones(len(A), dtype=bool)
    for i in range(1, r):
        # suffix minimum over blocks i+1..r
        hit = undecided & (lo[:, i:].min(axis=1) <= 2**i)
        cls[hit] = i
        undecided &= ~hit
    rows = np.arange(len(A))
    dead = hi[rows, cls - 1] == 0
    excluded = np.flatnonzero(dead).tolist()
    membership = np.where(dead, 0, cls)
    own_lo = lo[rows, cls - 1]
    bad = np.flatnonzero(~dead & (own_lo <= 2 ** (cls - 1)))
    violations = [(int(e), int(cls[e]), int(lo_sphere[e, cls[e] - 1]), int(own_lo[e])) for e in bad]
    classes = [A.subset(membership == i) for i in range(1, r + 1)]
    return AutPartition(classes, [2**i for i in range(1, r + 1)], membership, excluded, violations)


def verify_block_bounds(partition: AutPartition, plan: BlockPlan, params: SchemeParams) -> list[dict]:
    """Actual restricted sizes and motions per class, next to their worst-case bounds."""
    eps, k = params.epsilon, params.k
    rk = math.sqrt(k)
    out = []
    for idx, A_i in enumerate(partition.classes):
        i = idx + 1
        if len(A_i) == 0:
            continue
        R = restrict_set(A_i, plan.vertices[idx])
        motion = group_motion(R)
        size = len(R)
        two_log = 2.0 * math.log2(size)
        if i < plan.r:
            log2_bound = (1.0 - eps / 2.0) * (rk / 2.0) * 2**i
            motion_bound = plan.kappa * 2 ** (i - 1)
        else:
            log2_bound = params.c_tilde * (1.0 - eps / 2.0) * (rk / 2.0) * 2.0 ** ((1.0 - eps) * rk / 2.0)
            motion_bound = (eps / 2.0) * (1.0 - eps / 2.0) * k * 2 ** (plan.r - 1)
        out.append({"class": i, "size": len(A_i), "restricted_size": size, "motion": motion,
                    "two_log_size": two_log, "hypothesis": motion > two_log,
                    "log2_size_bound": log2_bound, "size_within_bound": math.log2(size) <= log2_bound,
                    "motion_bound": motion_bound, "motion_above_bound": motion > motion_bound})
    return out


@dataclass
class FixrootResult:
    coloring: PartialColoring
    colored: list
    delta: float
    k0: int
    stats: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"delta": self.delta, "k0": self.k0, "spheres": self.colored,
                "support": len(self.coloring), **({"search": self.stats} if self.stats else {})}


def window_sparsity_ok(colored, delta: float, k0: int, radius: int) -> bool:
    """Every window of w > k0 consecutive sphere indices holds fewer than delta*w coloured ones."""
    marks = np.zeros(radius + 2, dtype=np.int64)
    marks[np.asarray(sorted(colored), dtype=np.int64)] = 1
    csum = np.concatenate([[0], np.cumsum(marks)])
    for w in range(k0 + 1, radius + 2):
        counts = csum[w:] - csum[:-w]
        if counts.size and counts.max() >= delta * w:
            return False
    return True


def fixroot(g: LayeredGraph, A_moving: PermSet, delta: float, *, seed: int = 0) -> FixrootResult:
    """Sparse colouring breaking every automorphism that moves the base.

    Uses spheres 1, 1+q, 1+2q, ... with q = ceil(2/delta) and searches a
    colouring of their union with the motion engine.
    """
    if not 0.0 < delta < 1.0:
        raise ConfigError("delta must lie strictly between 0 and 1")
    if len(A_moving) == 0:
        return FixrootResult(PartialColoring.empty(), [], delta, 0)
    q = math.ceil(2.0 / delta)
    spheres = list(range(1, g.radius + 1, q))
    if not spheres:
        raise SearchFailure("no sphere available to pin the base", {"radius": g.radius})
    support = np.sort(np.concatenate([g.sphere(j) for j in spheres]))
    coloring, stats = search_coloring(A_moving, support, force=True, seed=seed, stream=(0, 0))
    left = surviving_mask(coloring, A_moving)
    if left.any():
        raise SearchFailure("allocated spheres cannot break every base-moving automorphism",
                            {"survivors": int(left.sum())})
    return FixrootResult(coloring, spheres, delta, q, stats.to_dict())


@dataclass
class StepResult:
    plan: BlockPlan
    partition: AutPartition
    coloring: PartialColoring
    record: dict


def scheme_step(g: LayeredGraph, targets: PermSet, params: SchemeParams, colored=(), *, seed: int = 0,
                iteration: int = 1, vertex_filter=None) -> StepResult:
    """One round: blocks, classes, and a colouring of each block breaking its class."""
    plan = compute_blocks(g, params, colored, vertex_filter)
    part = classify(targets, plan, g)
    margins = verify_block_bounds(part, plan, params)
    coloring = PartialColoring.empty()
    searches = []
    for idx, A_i in enumerate(part.classes):
        if len(A_i) == 0:
            continue
        i = idx + 1
        block = plan.vertices[idx]
        col, stats = search_coloring(A_i, block, force=True, seed=seed, stream=(iteration, i))
        if surviving_mask(col, A_i).any():
            raise SearchFailure(f"block colouring leaves class {i} unbroken", {"class": i})
        coloring = coloring.merge(col)
        searches.append({"class": i, **stats.to_dict()})
    strategies = sorted({s["strategy"] for s in searches})
    record = {
        "m": params.m, "c_tilde": params.c_tilde, "k": params.k, "kappa": plan.kappa, "r": plan.r,
        "uncolored_count": plan.l, "targets": len(targets), "class_sizes": part.sizes,
        "excluded": len(part.excluded), "invariant_violations": len(part.violations),
        "bound_margins": [{"class": b["class"], "motion": b["motion"], "two_log_size": b["two_log_size"],
                           "hypothesis": b["hypothesis"]} for b in margins],
        "search": {"strategy": strategies[0] if len(strategies) == 1 else ("none" if not strategies else "mixed"),
                   "tries": sum(s["tries"] for s in searches), "classes": searches},
    }
    return StepResult(plan, part, coloring, record)


def resolve_c(g: LayeredGraph, epsilon: float, c) -> tuple[float, bool]:
    if c is None or c == "auto":
        return GrowthBudget.fit(g, epsilon).c, True
    c = float(c)
    if not c > 0:
        raise ConfigError("growth constant must be positive")
    return c, False


def _colored_spheres(g: LayeredGraph, coloring: PartialColoring) -> set:
    if len(coloring) == 0:
        return set()
    return set(np.unique(g.level_of(coloring.support)).tolist())


def verification(g: LayeredGraph, A: PermSet, coloring: PartialColoring, m_cov: int,
                 extra_mask: np.ndarray | None = None) -> dict:
    """Survivors among nontrivial elements that move the base or a vertex within distance m_cov."""
    nontrivial = ~A.identity_mask()
    base_movers = ~A.fixes(g.base)
    near = A.moves_any(g.ids[: g.offsets[m_cov + 1]]) if m_cov > 0 else np.zeros(len(A), bool)
    check = nontrivial & (base_movers | near)
    if extra_mask is not None:
        check |= nontrivial & extra_mask
    checked = A.subset(check)
    surv = checked.subset(surviving_mask(coloring, checked))
    return {"m_cov": m_cov, "checked": len(checked), "unchecked": int(nontrivial.sum()) - len(checked),
            "survivors": surv.to_json()}


def run_pipeline(g: LayeredGraph, epsilon: float, c=None, *, seed: int = 0, force: bool = False,
                 margin: int = 1, cap: int = DEFAULT_CAP, group: PermSet | None = None,
                 ceiling: int = DEFAULT_CEILING) -> tuple[PartialColoring, dict]:
    """Pin the base, then break sphere blocks outwards until the truncation runs out."""
    _check_eps(epsilon)
    c_val, auto = resolve_c(g, epsilon, c)
    budget = GrowthBudget(epsilon, c_val)
    growth = growth_check(g, budget)
    report = {
        "config": {"epsilon": epsilon, "c": c_val, "c_mode": "auto" if auto else "value", "seed": seed,
                   "force": force, "margin": margin, "radius": g.radius},
        "growth": {"passed": growth.passed, "first_failure": growth.first_failure},
    }
    if not growth.passed and not force:
        n = growth.first_failure
        raise GrowthRefusal(f"ball of radius {n} has {int(growth.ball_sizes[n])} vertices, "
                            f"budget allows {growth.bounds[n]:.3f}", n, report)

    A = automorphisms(g, cap=cap) if group is None else group
    movers_mask = ~A.fixes(g.base)
    stab = A.subset(~movers_mask, closed=A.closed)
    report["group"] = {"order": len(A), "base_movers": int(movers_mask.sum()), "stabilizer": len(stab)}
    if len(A) <= 1:
        report["trivial"] = True
        report["note"] = "trivially 2-distinguishable: no nontrivial automorphism"
        report["iterations"] = []
        report["verification"] = {"m_cov": 0, "checked": 0, "unchecked": 0, "survivors": []}
        return PartialColoring.empty(), report
    report["trivial"] = False

    fr = fixroot(g, A.subset(movers_mask), epsilon / 2.0, seed=seed)
    report["fixroot"] = fr.to_dict()
    coloring = fr.coloring
    colored = set(fr.colored)

    iterations = []
    m = 0
    last_m = None
    stop = {}
    it = 0
    while True:
        ct = effective_constant(c_val, m, epsilon)
        room = g.radius - margin - m
        try:
            k = choose_k(ct, epsilon, fr.k0, ceiling)
        except CeilingExceeded as exc:
            if ceiling >= room:
                stop = {"reason": "no admissible depth inside the truncation", "m": m, "c_tilde": ct,
                        "failing": list(exc.failing)}
                break
            raise
        if m + k > g.radius - margin:
            stop = {"reason": "next block run exceeds the truncation", "m": m, "c_tilde": ct, "next_k": k}
            break
        it += 1
        params = SchemeParams(epsilon, c_val, m, ct, k, fr.k0, epsilon / 2.0)
        sphere_ids = g.sphere(m + 1)
        alive = surviving_mask(coloring, stab) if len(coloring) else np.ones(len(stab), dtype=bool)
        targets = stab.subset(alive & stab.moves_any(sphere_ids))
        step = scheme_step(g, targets, params, colored, seed=seed, iteration=it)
        coloring = coloring.merge(step.coloring)
        colored |= _colored_spheres(g, step.coloring)
        iterations.append(step.record)
        last_m = m
        m += k
    report["iterations"] = iterations
    report["stop"] = stop
    m_cov = 0 if last_m is None else last_m + 1
    report["verification"] = verification(g, A, coloring, m_cov)
    return coloring, report
