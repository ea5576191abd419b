"""Command line front end.

Subcommands::

    symbreak pipeline    --family grid2d --radius 25 --epsilon 0.9 --report r.json --coloring c.json
    symbreak ends        --family line --radius 40 --epsilon 0.5 --levels auto
    symbreak lemma-check --family ladder --radius 10
    symbreak motion-lab  --instances 100 --seed 1

Reports are JSON with sorted keys and embed the resolved configuration, so
the same arguments always produce the same bytes.  Errors go to stderr as a
one-line JSON record and set the exit status (2 config, 3 infeasible,
4 search failure, 5 enumeration cap).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .automorphisms import automorphisms
from .ends import ends_pipeline
from .errors import ConfigError, GrowthRefusal, SymbreakError
from .layered import FamilySpec, LayeredGraph, generate
from .structure import check_sphere_structure, disjoint_ray_witness, fixed_point_components
from .motion import bound_instances, double_count_check, sample_failures, search_coloring
from .perms import DEFAULT_CAP, random_permset
from .scheme import run_pipeline

SUBCOMMANDS = ("pipeline", "ends", "lemma-check", "motion-lab")


@dataclass
class RunConfig:
    command: str
    family: str = "grid2d"
    radius: int = 10
    epsilon: float = 0.5
    c: str = "auto"
    seed: int = 0
    force: bool = False
    margin: int = 1
    cap: int = DEFAULT_CAP
    levels: str = "auto"
    report: str | None = None
    coloring: str | None = None
    instances: int = 100
    max_points: int = 12
    trials: int = 10_000
    max_elements: int = 64

    def validate(self) -> None:
        if self.command not in SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand {self.command!r}")
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError(f"epsilon must lie strictly between 0 and 1, got {self.epsilon}")
        if self.radius < 1:
            raise ConfigError(f"radius must be at least 1, got {self.radius}")
        if self.margin < 0:
            raise ConfigError("margin must be non-negative")
        if self.c != "auto":
            try:
                value = float(self.c)
            except ValueError:
                raise ConfigError(f"--c expects 'auto' or a number, got {self.c!r}") from None
            if not value > 0:
                raise ConfigError("--c must be positive")

    @property
    def c_value(self):
        return None if self.c == "auto" else float(self.c)

    @property
    def level_list(self):
        if self.levels == "auto":
            return None
        try:
            return [int(x) for x in self.levels.replace(",", " ").split()]
        except ValueError:
            raise ConfigError(f"--levels expects 'auto' or a comma separated list, got {self.levels!r}") from None

    def resolved(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k not in ("report", "coloring")}
        if self.command == "motion-lab":
            return {k: out[k] for k in ("command", "seed", "instances", "max_points", "trials")}
        for k in ("instances", "max_points", "trials"):
            out.pop(k)
        if self.command != "ends":
            out.pop("levels")
        if self.command != "lemma-check":
            out.pop("max_elements")
        return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="symbreak", description="Two-colour symmetry breaking on layered graphs.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, graph=True):
        if graph:
            p.add_argument("--family", default="grid2d",
                           help="line, ladder, grid2d, regular-tree(d) or synthetic:<file>")
            p.add_argument("--radius", type=int, default=10)
            p.add_argument("--margin", type=int, default=1)
            p.add_argument("--cap", type=int, default=DEFAULT_CAP, help="automorphism enumeration cap")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--report", help="write the JSON report here (default: stdout)")

    for name in ("pipeline", "ends"):
        p = sub.add_parser(name)
        common(p)
        p.add_argument("--epsilon", type=float, default=0.5)
        p.add_argument("--c", default="auto", help="growth constant, or 'auto' to fit it")
        p.add_argument("--force", action="store_true", help="run even if the growth check fails")
        p.add_argument("--coloring", help="write the partial colouring JSON here")
        if name == "ends":
            p.add_argument("--levels", default="auto", help="'auto' or comma separated sphere indices")

    p = sub.add_parser("lemma-check")
    common(p)
    p.add_argument("--max-elements", type=int, default=64,
                   help="how many nontrivial stabilizer elements get component and path checks")

    p = sub.add_parser("motion-lab")
    common(p, graph=False)
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--max-points", type=int, default=12)
    p.add_argument("--trials", type=int, default=10_000)
    return parser


def config_from_args(argv=None) -> RunConfig:
    ns = build_parser().parse_args(argv)
    kw = {k: v for k, v in vars(ns).items() if v is not None or k in ("report", "coloring")}
    cfg = RunConfig(**kw)
    cfg.validate()
    return cfg


def dumps(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n").encode()


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _graph(cfg: RunConfig) -> LayeredGraph:
    return generate(FamilySpec.parse(cfg.family), cfg.radius)


def _run_pipeline(cfg: RunConfig, g: LayeredGraph):
    coloring, report = run_pipeline(g, cfg.epsilon, cfg.c_value, seed=cfg.seed, force=cfg.force,
                                    margin=cfg.margin, cap=cfg.cap)
    return coloring, report


def _run_ends(cfg: RunConfig, g: LayeredGraph):
    return ends_pipeline(g, cfg.epsilon, cfg.c_value, seed=cfg.seed, force=cfg.force, margin=cfg.margin,
                         levels=cfg.level_list, cap=cfg.cap)


def _run_lemma_check(cfg: RunConfig, g: LayeredGraph) -> dict:
    A = automorphisms(g, cap=cfg.cap)
    stab = A.subset(A.fixes(g.base))
    rep = check_sphere_structure(stab, g, cfg.margin)
    elements = []
    nontrivial = np.flatnonzero(~stab.identity_mask())
    for i in nontrivial[: cfg.max_elements]:
        phi = stab[int(i)]
        comps = fixed_point_components(phi, g)
        witnesses = [disjoint_ray_witness(phi, g, c["vertices"]).to_dict() if c["touches_outer"] else None
                     for c in comps.components]
        elements.append({"element": int(i), "motion": phi.motion, **comps.to_dict(), "witnesses": witnesses})
    return {"group": {"order": len(A), "stabilizer": len(stab)}, "spheres": rep.to_dict(),
            "elements": elements, "checked_elements": len(elements), "nontrivial": int(nontrivial.size),
            "all_components_reach_boundary": all(e["claim_holds"] for e in elements),
            "all_witnesses_found": all(w is not None and w["found"] for e in elements for w in e["witnesses"])}


def _run_motion_lab(cfg: RunConfig) -> dict:
    rng = np.random.default_rng(cfg.seed)
    double = []
    for _ in range(cfg.instances):
        p = int(rng.integers(1, cfg.max_points + 1))
        A = random_permset(rng, p, int(rng.integers(1, 9)))
        lhs, rhs = double_count_check(A)
        double.append(lhs == rhs)
    found = 0
    tries = 0
    instances = list(bound_instances(rng, cfg.instances, max_points=min(16, max(4, cfg.max_points))))
    for A, S in instances:
        try:
            _, stats = search_coloring(A, S, "exhaustive")
            found += 1
            tries += stats.tries
        except SymbreakError:
            pass
    A, S = instances[0] if instances else (None, None)
    sampled = {}
    if A is not None:
        fails, bound = sample_failures(A, S, cfg.trials, seed=cfg.seed)
        sampled = {"trials": cfg.trials, "failures": fails, "rate": fails / cfg.trials, "bound": bound}
    return {"double_count": {"instances": len(double), "equal": int(sum(double))},
            "bound_instances": {"instances": len(instances), "broken": found, "exhaustive_tries": tries},
            "sampling": sampled}


def render_outputs(cfg: RunConfig, graph: LayeredGraph | None = None) -> tuple[bytes, bytes | None]:
    """Report bytes and colouring bytes (``None`` where the command emits no colouring)."""
    cfg.validate()
    if cfg.command == "motion-lab":
        body = _run_motion_lab(cfg)
        return dumps({"config": cfg.resolved(), **body}), None
    g = _graph(cfg) if graph is None else graph
    if cfg.command == "lemma-check":
        return dumps({"config": cfg.resolved(), **_run_lemma_check(cfg, g)}), None
    runner = _run_pipeline if cfg.command == "pipeline" else _run_ends
    coloring, report = runner(cfg, g)
    report["config"] = {**cfg.resolved(), **report["config"]}
    return dumps(report), dumps(coloring.to_dict())


def _write(path, data: bytes) -> None:
    Path(path).write_bytes(data)


def main(argv=None) -> int:
    cfg = None
    try:
        cfg = config_from_args(argv)
        report, coloring = render_outputs(cfg)
    except SymbreakError as exc:
        record = exc.record()
        if isinstance(exc, GrowthRefusal) and exc.report is not None:
            record["report"] = exc.report
            if cfg is not None and cfg.report:
                _write(cfg.report, dumps({**exc.report, "error": exc.record()}))
        sys.stderr.write(json.dumps(record, sort_keys=True, default=_json_default) + "\n")
        return exc.exit_code
    if cfg.report:
        _write(cfg.report, report)
    else:
        sys.stdout.write(report.decode())
    if coloring is not None and cfg.coloring:
        _write(cfg.coloring, coloring)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
