"""Benchmark protocol: budgets, run matrix, CSV rows, aggregation.

A plan names world files, seeds and algorithms. Every run derives its
deployment point from the seed (uniform over the free cells in file
reading order), inherits the world's agent budget and the size-class
time budget, and contributes one CSV row. Rows sort by (world, seed,
algorithm) no matter how the work was scheduled, and wall_ms stays 0
unless timing was requested, so repeated runs produce byte-identical
files.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import apf_run, isda_run, square_lattice_run, triangle_lattice_run
from .cadence import cadence_run
from .dadence import dadence_run
from .quadtree import RANK_DIVISOR, node_count
from .sim import RNG_DEPLOYMENT, InvariantMode, RunConfig, RunMetrics
from .visibility import FovCache
from .world import GridWorld, WorldAnalysis, analyze, load, validate_world

log = logging.getLogger("guardgrid.bench")

TIME_BUDGETS = {50: 5000, 100: 10000, 250: 30000}

CSV_COLUMNS = ("world", "seed", "algorithm", "size", "quadtree_nodes",
               "rank", "n", "h", "n_max", "t_max", "coverage_pct", "steps",
               "final_agents", "max_agents", "lost_agents", "status",
               "wall_ms")

# cache every source cell on small grids; bound memory on large ones
_CACHE_LIMIT_BITS = 1 << 14
_CACHE_ENTRIES = 12000


class UnknownSizeClass(ValueError):
    def __init__(self, size: int):
        self.size = size
        super().__init__(f"no time budget for size class {size}")


def size_class(world: GridWorld) -> int:
    side = max(world.width, world.height)
    if side not in TIME_BUDGETS:
        raise UnknownSizeClass(side)
    return side


def budget_for(size: int) -> int:
    """Tick budget of a size class."""
    if size not in TIME_BUDGETS:
        raise UnknownSizeClass(size)
    return TIME_BUDGETS[size]


def agent_budget(analysis: WorldAnalysis) -> int:
    return analysis.m_valid


ALGORITHMS = {
    "cadence": (lambda w, c, f: cadence_run(w, c, cache=f),
                InvariantMode.ASSERT),
    "dadence": (lambda w, c, f: dadence_run(w, c, cache=f),
                InvariantMode.ASSERT),
    "square_lattice": (square_lattice_run, InvariantMode.RECORD),
    "triangle_lattice": (triangle_lattice_run, InvariantMode.RECORD),
    "apf": (apf_run, InvariantMode.RECORD),
    "isda": (isda_run, InvariantMode.RECORD),
}


@dataclass(frozen=True)
class BenchPlan:
    worlds: tuple[str, ...]
    seeds: tuple[int, ...]
    algorithms: tuple[str, ...]
    constants: dict = field(default_factory=dict)   # per-algorithm overrides

    def __post_init__(self):
        for name in self.algorithms:
            if name not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {name!r}")


def parse_plan(text: str, base_dir: Path | str = ".") -> BenchPlan:
    try:
        import tomllib
    except ModuleNotFoundError:                      # python < 3.11
        import tomli as tomllib
    data = tomllib.loads(text)
    base = Path(base_dir)
    worlds = tuple(str(base / w) for w in data["worlds"])
    return BenchPlan(
        worlds=worlds,
        seeds=tuple(int(s) for s in data["seeds"]),
        algorithms=tuple(data["algorithms"]),
        constants={k: dict(v) for k, v in data.get("constants", {}).items()},
    )


def load_plan(path) -> BenchPlan:
    p = Path(path)
    return parse_plan(p.read_text(encoding="utf-8"), p.parent)


def derive_deployment(world: GridWorld, seed: int) -> GridWorld:
    """Replace the deployment point by the seed-derived one."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, RNG_DEPLOYMENT]))
    cell = world.scan_free_cells()[int(rng.integers(world.free_count))]
    return dataclasses.replace(world, deployment=cell)


def world_cache(world: GridWorld) -> FovCache:
    if world.n_bits <= _CACHE_LIMIT_BITS:
        return FovCache(world)
    return FovCache(world, maxsize=_CACHE_ENTRIES)


def run_single(world: GridWorld, algorithm: str, seed: int,
               constants: dict | None = None, timing: bool = False,
               analysis: WorldAnalysis | None = None,
               cache: FovCache | None = None,
               world_name: str = "") -> dict:
    runner, mode = ALGORITHMS[algorithm]
    if analysis is None:
        analysis = analyze(world)
    size = size_class(world)
    t_max = budget_for(size)
    n_max = agent_budget(analysis)
    nodes = node_count(world)
    staged = derive_deployment(world, seed)
    config = RunConfig(algorithm=algorithm, seed=seed, n_max=n_max,
                       t_max=t_max, invariant_mode=mode,
                       constants=dict(constants or {}))
    t0 = time.perf_counter()
    try:
        metrics, _state = runner(staged, config, cache)
    except Exception as exc:                     # error rows carry the type
        log.warning("run %s/%s/seed=%d failed: %r", world_name, algorithm,
                    seed, exc)
        metrics = RunMetrics(0.0, 0, 0, 0, 0,
                             status=f"error:{type(exc).__name__}")
    wall_ms = int(round((time.perf_counter() - t0) * 1000)) if timing else 0
    return {
        "world": world_name,
        "seed": seed,
        "algorithm": algorithm,
        "size": size,
        "quadtree_nodes": nodes,
        "rank": nodes // RANK_DIVISOR,
        "n": analysis.n,
        "h": analysis.h,
        "n_max": n_max,
        "t_max": t_max,
        "coverage_pct": metrics.coverage_pct,
        "steps": metrics.steps,
        "final_agents": metrics.final_agents,
        "max_agents": metrics.max_agents,
        "lost_agents": metrics.lost_agents,
        "status": metrics.status,
        "wall_ms": wall_ms,
    }


def _world_rows(path: str, seeds, algorithms, constants, timing) -> list[dict]:
    world = load(path)
    validate_world(world)
    analysis = analyze(world)
    cache = world_cache(world)
    name = Path(path).name
    rows = []
    for seed in seeds:
        for algorithm in algorithms:
            log.info("bench %s seed=%d %s", name, seed, algorithm)
            rows.append(run_single(
                world, algorithm, seed,
                constants=constants.get(algorithm, {}), timing=timing,
                analysis=analysis, cache=cache, world_name=name))
    return rows


def _world_rows_task(args) -> list[dict]:
    return _world_rows(*args)


def run_plan(plan: BenchPlan, jobs: int = 1,
             timing: bool = False) -> list[dict]:
    tasks = [(path, plan.seeds, plan.algorithms, plan.constants, timing)
             for path in plan.worlds]
    if jobs > 1:
        import multiprocessing as mp
        with mp.Pool(jobs) as pool:
            chunks = pool.map(_world_rows_task, tasks)
    else:
        chunks = [_world_rows_task(t) for t in tasks]
    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=lambda r: (r["world"], r["seed"], r["algorithm"]))
    return rows


def _format_row(row: dict) -> list[str]:
    out = []
    for col in CSV_COLUMNS:
        v = row[col]
        out.append(f"{v:.4f}" if col == "coverage_pct" else str(v))
    return out


def write_csv(rows: list[dict], path) -> None:
    with open(path, "w", encoding="ascii", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in rows:
            w.writerow(_format_row(row))


def read_csv(path) -> list[dict]:
    with open(path, "r", encoding="ascii", newline="") as f:
        return list(csv.DictReader(f))


AGG_COLUMNS = ("rank", "algorithm", "runs", "mean_coverage_pct",
               "mean_steps", "mean_final_agents", "mean_max_agents",
               "mean_lost_agents", "full_coverage_rate")


def aggregate(rows: list[dict]) -> list[dict]:
    """Per-(rank, algorithm) means over completed rows; error rows only
    count.  Budget-limited runs stay in: their partial coverage is the
    result being measured."""
    groups: dict[tuple[int, str], list[dict]] = {}
    for row in rows:
        groups.setdefault((int(row["rank"]), row["algorithm"]), []).append(row)
    out = []
    for (rk, algo) in sorted(groups):
        bucket = groups[(rk, algo)]
        ok = [r for r in bucket if not r["status"].startswith("error:")]
        n = max(1, len(ok))
        full = sum(1 for r in ok if float(r["coverage_pct"]) >= 100.0 - 1e-9)
        out.append({
            "rank": rk,
            "algorithm": algo,
            "runs": len(bucket),
            "mean_coverage_pct": sum(float(r["coverage_pct"]) for r in ok) / n,
            "mean_steps": sum(int(r["steps"]) for r in ok) / n,
            "mean_final_agents": sum(int(r["final_agents"]) for r in ok) / n,
            "mean_max_agents": sum(int(r["max_agents"]) for r in ok) / n,
            "mean_lost_agents": sum(int(r["lost_agents"]) for r in ok) / n,
            "full_coverage_rate": full / n,
        })
    return out


def write_aggregate(agg: list[dict], path) -> None:
    with open(path, "w", encoding="ascii", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(AGG_COLUMNS)
        for row in agg:
            w.writerow([f"{row[c]:.4f}" if c.startswith(("mean_", "full_"))
                        else str(row[c]) for c in AGG_COLUMNS])
