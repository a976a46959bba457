"""Reference deployment strategies: lattices, potential fields, border chase.

The lattice runners claim grid-aligned sites nearest-first through known
space with one spawn per tick and concurrent walkers. The potential-field
runner pushes agents down a repulsive field until everything is stuck.
The border-chase runner keeps exactly one agent in flight toward a
uniformly random reachable border cell. Lattice and border-chase walkers
move only through cells already known when their path was planned and do
not reserve the cells they pass through; arrivals settle, extend the
known region, and trigger a greedy deallocation pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .dealloc import Deallocator
from .sim import RNG_ISDA, AgentState, RunConfig, RunMetrics, SimState
from .visibility import FovCache
from .world import (NEIGHBOUR_STEPS, Cell, GridWorld, bfs_distance_field,
                    border)


@dataclass(frozen=True)
class LatticeConfig:
    spacing: int = 1


@dataclass(frozen=True)
class ApfConfig:
    k_obstacle: float = 1.0
    k_agent: float = 1.0
    sense_radius: float = 5.0
    move_threshold: float = 0.05


def lattice_sites(world: GridWorld, spacing: int,
                  triangular: bool) -> list[Cell]:
    """Free cells on the lattice anchored at the deployment point; on the
    triangular variant every other site row shifts by half the spacing.
    The deployment cell itself is excluded. Order: y desc, x asc."""
    dep = world.deployment
    r = max(1, int(spacing))
    sites = []
    for y in range(world.height - 1, -1, -1):
        if (y - dep.y) % r:
            continue
        off = (r // 2) if (triangular and (((y - dep.y) // r) & 1)) else 0
        for x in range(world.width):
            if (x - dep.x - off) % r:
                continue
            if world.free[y, x] and not (x == dep.x and y == dep.y):
                sites.append(Cell(x, y))
    return sites


def _first_step(world: GridWorld, f: np.ndarray, cell: Cell,
                occupied: set[Cell] | None) -> Cell | None:
    """First N,E,S,W neighbour one step down the distance field."""
    d = int(f[cell.y, cell.x])
    if d <= 0:
        return None
    for dx, dy in NEIGHBOUR_STEPS:
        nc = Cell(cell.x + dx, cell.y + dy)
        if not (0 <= nc.x < world.width and 0 <= nc.y < world.height):
            continue
        if int(f[nc.y, nc.x]) != d - 1:
            continue
        if occupied is not None and nc in occupied:
            continue
        return nc
    return None


def _settle(state: SimState, dealloc: Deallocator, running: np.ndarray,
            arrivals) -> None:
    """Land arrivals, mark them terminal, retire redundant guards."""
    for a in arrivals:
        state.land_walker(a.id)
        state.set_terminal(a.id)
        dealloc.add(a.id, a.cell)
        running |= state.cache.get_bits(a.cell)
    for key in dealloc.sweep()[0]:
        state.deallocate_agent(key)
    settled = [a.cell for a in state.live_agents()
               if a.state is AgentState.TERMINAL]
    fresh = state.check_coverage_monotone(settled, running.copy())
    state.check_connected(settled, fresh)


def _lattice_run(world: GridWorld, config: RunConfig, cache: FovCache | None,
                 triangular: bool) -> tuple[RunMetrics, SimState]:
    state = SimState(world, config, cache)
    spacing = int(config.constants.get("spacing", LatticeConfig.spacing))
    sites = lattice_sites(world, spacing, triangular)
    sxs = np.array([c.x for c in sites], dtype=np.int64)
    sys_ = np.array([c.y for c in sites], dtype=np.int64)
    claimed = np.zeros(len(sites), dtype=bool)
    # composite argmin key encodes distance, then y desc, then x asc
    rank = (world.height - 1 - sys_) * world.width + sxs
    never = np.iinfo(np.int64).max
    dep = world.deployment
    dealloc = Deallocator(world, state.cache, dep)
    running = state.known_bits.copy()
    dep_field: np.ndarray | None = None
    dep_epoch = -1
    walk: dict[int, np.ndarray] = {}

    status = "ok"
    while state.known_count < world.free_count:
        if state.step >= config.t_max:
            status = "budget"
            break
        active = [a for a in state.live_agents()
                  if a.state is AgentState.ACTIVE]
        if len(sites) and dep_epoch != state.known_count:
            dep_field = bfs_distance_field(world, dep, state.known_mask)
            dep_epoch = state.known_count
        if len(sites):
            dist = dep_field[sys_, sxs].astype(np.int64)
            cand = ~claimed & state.known_mask[sys_, sxs] & (dist >= 0)
        else:
            cand = np.zeros(0, dtype=bool)
        if not cand.any() and not active:
            # every reachable site is settled; remaining gaps are the result
            break
        if not active and not state.can_spawn():
            # all slots held by guards the sweep cannot spare: with nobody
            # in flight there are no arrivals, so no slot ever frees
            status = "budget"
            break
        state.begin_tick()

        if cand.any() and state.can_spawn():
            key = np.where(cand, dist * np.int64(world.n_bits + 1) + rank,
                           never)
            i = int(np.argmin(key))
            target = sites[i]
            claimed[i] = True
            agent = state.spawn_walker(target)
            state.events.append(state.step, "assign", agent.id, target)
            walk[agent.id] = bfs_distance_field(world, target,
                                                state.known_mask)

        for agent in active:
            nc = _first_step(world, walk[agent.id], agent.cell, None)
            if nc is not None:
                state.move_walker(agent.id, nc)

        arrivals = [a for a in active if a.cell == a.target]
        if arrivals:
            for a in arrivals:
                del walk[a.id]
            _settle(state, dealloc, running, arrivals)

    return state.finalize(status), state


def square_lattice_run(world: GridWorld, config: RunConfig,
                       cache: FovCache | None = None):
    return _lattice_run(world, config, cache, triangular=False)


def triangle_lattice_run(world: GridWorld, config: RunConfig,
                         cache: FovCache | None = None):
    return _lattice_run(world, config, cache, triangular=True)


def isda_run(world: GridWorld, config: RunConfig,
             cache: FovCache | None = None) -> tuple[RunMetrics, SimState]:
    """Strictly sequential border chase: one agent in flight at a time,
    each sent to a uniformly random reachable border cell."""
    state = SimState(world, config, cache)
    dep = world.deployment
    rng = state.rng(RNG_ISDA)
    dealloc = Deallocator(world, state.cache, dep)
    running = state.known_bits.copy()
    walk_field: np.ndarray | None = None

    status = "ok"
    while state.known_count < world.free_count:
        if state.step >= config.t_max:
            status = "budget"
            break
        active = [a for a in state.live_agents()
                  if a.state is AgentState.ACTIVE]
        if not active:
            cells = border(world, state.known_mask)
            dep_field = bfs_distance_field(world, dep, state.known_mask)
            reachable = [c for c in cells if dep_field[c.y, c.x] >= 0]
            if not reachable or not state.can_spawn():
                status = "budget" if reachable else "stalled"
                break
            target = reachable[int(rng.integers(len(reachable)))]
            state.begin_tick()
            agent = state.spawn_walker(target)
            state.events.append(state.step, "assign", agent.id, target)
            walk_field = bfs_distance_field(world, target, state.known_mask)
            continue
        state.begin_tick()
        agent = active[0]
        nc = _first_step(world, walk_field, agent.cell, None)
        if nc is not None:
            state.move_walker(agent.id, nc)
        if agent.cell == agent.target:
            _settle(state, dealloc, running, [agent])
            walk_field = None

    return state.finalize(status), state


def apf_run(world: GridWorld, config: RunConfig,
            cache: FovCache | None = None) -> tuple[RunMetrics, SimState]:
    """Inverse-square repulsion from sensed walls, other agents and the
    deployment point. Agents apply moves one at a time in ascending id;
    a tick with no movement spawns, and the run ends when everything is
    stuck and spawning is impossible. Connectivity is settled once at the
    end: survivors outside the deployment point's visibility component
    count as lost."""
    state = SimState(world, config, cache)
    k_o = float(config.constants.get("k_obstacle", ApfConfig.k_obstacle))
    k_a = float(config.constants.get("k_agent", ApfConfig.k_agent))
    radius = float(config.constants.get("sense_radius",
                                        ApfConfig.sense_radius))
    thr = float(config.constants.get("move_threshold",
                                     ApfConfig.move_threshold))
    dep = world.deployment

    status = "ok"
    while True:
        if state.step >= config.t_max:
            status = "budget"
            break
        state.begin_tick()
        moved = False
        for agent in state.live_agents():
            ids = sorted(state.agents)
            axs = np.array([state.agents[i].cell.x for i in ids],
                           dtype=np.int64)
            ays = np.array([state.agents[i].cell.y for i in ids],
                           dtype=np.int64)
            d = K.apf_decide(world.free, axs, ays, ids.index(agent.id),
                             dep.x, dep.y, k_o, k_a, radius, thr)
            if d >= 0:
                dx, dy = NEIGHBOUR_STEPS[d]
                state.apply_moves(
                    {agent.id: Cell(agent.cell.x + dx, agent.cell.y + dy)})
                moved = True
        spawned = False
        if not moved and state.can_spawn():
            state.spawn()
            spawned = True
        if not moved and not spawned:
            break

    survivors = state.live_agents()
    if survivors:
        cells = [dep] + [a.cell for a in survivors]
        rows = np.empty((len(cells), world.n_words), dtype=np.uint64)
        for i, c in enumerate(cells):
            rows[i] = state.cache.get_bits(c)
        flat = np.array([world.cell_index(c) for c in cells], dtype=np.int64)
        seen = np.zeros(len(cells), dtype=np.uint8)
        K.reach_mask(rows, flat, 0, seen)
        dealloc = Deallocator(world, state.cache, dep)
        for i, a in enumerate(survivors, start=1):
            if seen[i]:
                state.set_terminal(a.id)
                dealloc.add(a.id, a.cell)
        for key in dealloc.sweep()[0]:
            state.deallocate_agent(key)
    return state.finalize(status), state
