"""Command line interface.

Subcommands: gen (dungeon worlds), run (one algorithm on one world),
bench (a plan of runs to CSV), inspect (world facts), render (ASCII or
PPM picture, optionally replaying an event log). Data goes to stdout or
the requested file; diagnostics go to stderr. Exit codes: 0 success,
1 invariant violation during a run, 2 usage or input errors. Set GG_LOG
to 1 or 2 for progress logging on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from . import bench as bench_mod
from . import dungeon, quadtree, world as world_mod
from .sim import InvariantMode, InvariantViolation, RunConfig
from .visibility import FovCache, fov_bits
from .world import Cell, GridWorld, WorldError, analyze

log = logging.getLogger("guardgrid")


def _setup_logging() -> None:
    level = {"": logging.WARNING, "0": logging.WARNING,
             "1": logging.INFO, "2": logging.DEBUG}
    logging.basicConfig(stream=sys.stderr, format="%(name)s: %(message)s",
                        level=level.get(os.environ.get("GG_LOG", ""),
                                        logging.INFO))


def _write_text(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="ascii")
    else:
        sys.stdout.write(text)


# -- gen ---------------------------------------------------------------------

def cmd_gen(args) -> int:
    table = dungeon.HALL_PARAMS if args.hall else dungeon.DEFAULT_PARAMS
    if args.size not in table:
        print(f"unknown size {args.size}; expected one of {sorted(table)}",
              file=sys.stderr)
        return 2
    params = table[args.size]
    w = dungeon.generate(params, args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / dungeon.world_filename(args.size, args.seed)
    world_mod.save(w, path)
    print(path)
    return 0


# -- run ---------------------------------------------------------------------

def cmd_run(args) -> int:
    w = world_mod.load(args.world)
    world_mod.validate_world(w)
    analysis = analyze(w)
    if args.deployment:
        x, y = (int(v) for v in args.deployment.split(","))
        w = dataclasses.replace(w, deployment=Cell(x, y))
        world_mod.validate_world(w)
    else:
        w = bench_mod.derive_deployment(w, args.seed)
    runner, mode = bench_mod.ALGORITHMS[args.algorithm]
    if args.record:
        mode = InvariantMode.RECORD
    size = bench_mod.size_class(w)
    config = RunConfig(
        algorithm=args.algorithm,
        seed=args.seed,
        n_max=args.n_max if args.n_max is not None
        else bench_mod.agent_budget(analysis),
        t_max=args.t_max if args.t_max is not None
        else bench_mod.budget_for(size),
        invariant_mode=mode,
    )
    try:
        metrics, state = runner(w, config, bench_mod.world_cache(w))
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 1
    if args.events:
        Path(args.events).write_text(state.events.dumps(), encoding="ascii")
    print(json.dumps({
        "world": str(args.world), "algorithm": args.algorithm,
        "seed": args.seed, "coverage_pct": round(metrics.coverage_pct, 4),
        "steps": metrics.steps, "final_agents": metrics.final_agents,
        "max_agents": metrics.max_agents, "lost_agents": metrics.lost_agents,
        "status": metrics.status,
        "violations": state.monitor.violations,
    }, separators=(",", ":")))
    return 1 if state.monitor.violations else 0


# -- bench -------------------------------------------------------------------

def cmd_bench(args) -> int:
    plan = bench_mod.load_plan(args.plan)
    rows = bench_mod.run_plan(plan, jobs=args.jobs, timing=args.timing)
    bench_mod.write_csv(rows, args.out)
    log.info("wrote %d rows to %s", len(rows), args.out)
    if args.aggregate:
        bench_mod.write_aggregate(bench_mod.aggregate(rows), args.aggregate)
    bad = sum(1 for r in rows if r["status"] != "ok")
    if bad:
        print(f"{bad} runs ended in error", file=sys.stderr)
    return 0


# -- inspect -----------------------------------------------------------------

def cmd_inspect(args) -> int:
    w = world_mod.load(args.world)
    world_mod.validate_world(w)
    a = analyze(w)
    nodes = quadtree.node_count(w)
    info = {
        "width": w.width, "height": w.height, "free_count": w.free_count,
        "deployment": [w.deployment.x, w.deployment.y],
        "n": a.n, "h": a.h, "m_refl": a.m_refl, "m_valid": a.m_valid,
        "quadtree_nodes": nodes, "rank": nodes // quadtree.RANK_DIVISOR,
    }
    if args.json:
        print(json.dumps(info, separators=(",", ":")))
    else:
        for k, v in info.items():
            print(f"{k}: {v}")
    return 0


# -- render ------------------------------------------------------------------

def replay_events(path, step: int | None):
    """Agent cells, settled flags and marker cells after the given step."""
    agents: dict[int, tuple[int, int]] = {}
    settled: set[int] = set()
    targets: dict[int, tuple[int, int]] = {}
    rally: tuple[int, int] | None = None
    last = 0
    with open(path, "r", encoding="ascii") as f:
        for line in f:
            ev = json.loads(line)
            if step is not None and ev["step"] > step:
                break
            last = ev["step"]
            kind = ev["kind"]
            cell = tuple(ev["cell"]) if ev["cell"] else None
            aid = ev["agent"]
            if kind == "spawn":
                agents[aid] = cell
            elif kind == "move":
                agents[aid] = cell
            elif kind == "assign":
                targets[aid] = cell
            elif kind == "target":
                rally = cell
            elif kind == "terminal":
                settled.add(aid)
                targets.pop(aid, None)
            elif kind in ("dealloc",):
                agents.pop(aid, None)
                settled.discard(aid)
    marks = set(targets.values())
    if rally is not None:
        marks.add(rally)
    return agents, settled, marks, last


def render_ascii(w: GridWorld, agents=None, marks=None,
                 known_bits=None) -> str:
    """Rows top first: '#' blocked, '.' known free, ' ' unseen free,
    'A' agent, 'D' deployment, '*' marker."""
    agents = agents or {}
    marks = marks or set()
    occupied = {tuple(c) for c in agents.values()}
    lines = []
    for y in range(w.height - 1, -1, -1):
        row = []
        for x in range(w.width):
            if not w.free[y, x]:
                ch = "#"
            elif (x, y) == (w.deployment.x, w.deployment.y):
                ch = "D"
            elif (x, y) in occupied:
                ch = "A"
            elif (x, y) in marks:
                ch = "*"
            elif known_bits is None:
                ch = "."
            else:
                idx = y * w.width + x
                ch = "." if (int(known_bits[idx >> 6]) >> (idx & 63)) & 1 \
                    else " "
            row.append(ch)
        lines.append("".join(row))
    return "\n".join(lines) + "\n"


_PALETTE = {
    "#": (40, 40, 40), ".": (255, 255, 255), " ": (170, 170, 170),
    "A": (200, 40, 40), "D": (40, 90, 220), "*": (240, 190, 40),
}


def render_ppm(w: GridWorld, agents=None, marks=None, known_bits=None,
               scale: int = 4) -> bytes:
    text = render_ascii(w, agents, marks, known_bits)
    rows = text.splitlines()
    header = f"P6 {w.width * scale} {w.height * scale} 255\n".encode("ascii")
    body = bytearray()
    for row in rows:
        line = bytearray()
        for ch in row:
            line.extend(bytes(_PALETTE[ch]) * scale)
        body.extend(bytes(line) * scale)
    return header + bytes(body)


def cmd_render(args) -> int:
    w = world_mod.load(args.world)
    agents = marks = known = None
    if args.events:
        amap, settled, marks, _ = replay_events(args.events, args.step)
        agents = amap
        sources = [w.deployment] + [Cell(*c) for c in amap.values()]
        known = fov_bits(w, sources, FovCache(w))
    if args.format == "ppm":
        data = render_ppm(w, agents, marks, known, scale=args.scale)
        if args.out:
            Path(args.out).write_bytes(data)
        else:
            sys.stdout.buffer.write(data)
    else:
        _write_text(render_ascii(w, agents, marks, known), args.out)
    return 0


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="guardgrid",
                                description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a dungeon world file")
    g.add_argument("--size", type=int, required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--hall", action="store_true",
                   help="single open hall instead of rooms and corridors")
    g.add_argument("--out", default=".")
    g.set_defaults(fn=cmd_gen)

    r = sub.add_parser("run", help="run one algorithm on one world")
    r.add_argument("--world", required=True)
    r.add_argument("--algorithm", required=True,
                   choices=sorted(bench_mod.ALGORITHMS))
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--n-max", type=int, default=None)
    r.add_argument("--t-max", type=int, default=None)
    r.add_argument("--deployment", default=None,
                   help="x,y override; default derives from the seed")
    r.add_argument("--events", default=None, help="write JSONL event log")
    r.add_argument("--record", action="store_true",
                   help="log invariant violations instead of raising")
    r.set_defaults(fn=cmd_run)

    b = sub.add_parser("bench", help="run a benchmark plan")
    b.add_argument("--plan", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--aggregate", default=None)
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--timing", action="store_true",
                   help="fill wall_ms (breaks byte-reproducibility)")
    b.set_defaults(fn=cmd_bench)

    i = sub.add_parser("inspect", help="print world facts")
    i.add_argument("--world", required=True)
    i.add_argument("--json", action="store_true")
    i.set_defaults(fn=cmd_inspect)

    d = sub.add_parser("render", help="draw a world, optionally with events")
    d.add_argument("--world", required=True)
    d.add_argument("--events", default=None)
    d.add_argument("--step", type=int, default=None)
    d.add_argument("--format", choices=("ascii", "ppm"), default="ascii")
    d.add_argument("--scale", type=int, default=4)
    d.add_argument("--out", default=None)
    d.set_defaults(fn=cmd_render)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 1
    except (WorldError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
