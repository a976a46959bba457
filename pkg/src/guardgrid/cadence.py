"""Corner-guard deployment over an initially unknown grid.

Settled agents and the deployment pseudo-agent reveal the world; valid
corner cells observed in that accumulated view become targets. Each tick
spawns at most one agent, assigned to the nearest unclaimed observed
corner cell (ties toward larger y, then smaller x), and every en-route
agent advances one cell along a shortest path through known space,
waiting when the next cell is occupied (lower ids move first). Arrivals
settle in place, then a greedy deallocation pass retires newly redundant
guards.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from . import _kernels as K
from .dealloc import Deallocator
from .sim import AgentState, RunConfig, RunMetrics, SimState
from .visibility import FovCache
from .world import (NEIGHBOUR_STEPS, Cell, GridWorld, WorldAnalysis, analyze,
                    bfs_distance_field)


def cadence_step_condition(s_prime: Iterable, agents: Iterable,
                           targets: Iterable, x_d) -> bool:
    """True while deployment must continue.

    The loop stops once the observed corner cells, the occupied cells and
    the claimed targets coincide as sets, either all without the
    deployment point or all with it.
    """
    sp = frozenset((int(c[0]), int(c[1])) for c in s_prime)
    a = frozenset((int(c[0]), int(c[1])) for c in agents)
    t = frozenset((int(c[0]), int(c[1])) for c in targets)
    if sp == a == t:
        return False
    d = frozenset({(int(x_d[0]), int(x_d[1]))})
    return not (sp == (a | d) == (t | d))


class _FieldCache:
    """Shortest-path fields over the walkable region.

    Walkable = known and not occupied by a settled agent; fields are
    dropped whenever knowledge grows or the settled set changes.
    """

    def __init__(self, world: GridWorld):
        self.world = world
        self.fields: dict[Cell, np.ndarray] = {}
        self.epoch = None
        self.mask: np.ndarray | None = None

    def set_epoch(self, epoch, mask: np.ndarray) -> None:
        if epoch != self.epoch:
            self.epoch = epoch
            self.mask = mask
            self.fields.clear()

    def field(self, source: Cell) -> np.ndarray:
        f = self.fields.get(source)
        if f is None:
            f = bfs_distance_field(self.world, source, self.mask)
            self.fields[source] = f
        return f


def cadence_run(world: GridWorld, config: RunConfig,
                analysis: WorldAnalysis | None = None,
                cache: FovCache | None = None) -> tuple[RunMetrics, SimState]:
    if analysis is None:
        analysis = analyze(world)
    state = SimState(world, config, cache)
    dealloc = Deallocator(world, state.cache, world.deployment)
    fields = _FieldCache(world)
    dep = world.deployment
    # corner guard cells; two corners may share one cell, one guard serves both
    corner_cells = sorted({c.agent_cell for c in analysis.valid_corners},
                          key=lambda c: (c.y, c.x))
    corner_idx = [world.cell_index(c) for c in corner_cells]
    assigned: set[Cell] = set()
    # settled guards block their cells; paths must route around them
    term_mask = np.zeros((world.height, world.width), dtype=bool)
    term_rev = 0

    status = "ok"
    while True:
        observed = [c for c, idx in zip(corner_cells, corner_idx)
                    if c not in assigned and c != dep
                    and K.test_bit(state.known_bits, idx)]
        active = [a for a in state.live_agents()
                  if a.state is AgentState.ACTIVE]
        if not observed and not active:
            break
        if state.step >= config.t_max:
            status = "budget"
            break
        state.begin_tick()
        fields.set_epoch((state.known_count, term_rev),
                         state.known_mask & ~term_mask)

        spawned = None
        if observed and state.can_spawn():
            dist = fields.field(dep)
            best, best_key = None, None
            for c in observed:
                d = int(dist[c.y, c.x])
                if d < 0:
                    continue
                key = (d, -c.y, c.x)
                if best_key is None or key < best_key:
                    best, best_key = c, key
            if best is not None:
                spawned = state.spawn(best)
                assigned.add(best)
                state.events.append(state.step, "assign", spawned.id, best)

        occupied = {a.cell for a in state.live_agents()}
        moves: dict[int, Cell] = {}
        for agent in active:
            f = fields.field(agent.target)
            d = int(f[agent.cell.y, agent.cell.x])
            if d <= 0:
                continue
            for dx, dy in NEIGHBOUR_STEPS:
                nc = Cell(agent.cell.x + dx, agent.cell.y + dy)
                if not (0 <= nc.x < world.width and 0 <= nc.y < world.height):
                    continue
                if int(f[nc.y, nc.x]) != d - 1 or nc in occupied:
                    continue
                occupied.discard(agent.cell)
                occupied.add(nc)
                moves[agent.id] = nc
                break
        state.apply_moves(moves)

        arrivals = [a for a in active if a.cell == a.target]
        for a in arrivals:
            state.set_terminal(a.id)
            term_mask[a.cell.y, a.cell.x] = True
            dealloc.add(a.id, a.cell)
        if arrivals:
            for key in dealloc.sweep()[0]:
                cell = state.agents[key].cell
                term_mask[cell.y, cell.x] = False
                state.deallocate_agent(key)
            term_rev += 1

        settled = [a.cell for a in state.live_agents()
                   if a.state is AgentState.TERMINAL]
        fresh = state.check_coverage_monotone(settled)
        state.check_connected(settled, fresh)

        if spawned is None and not moves and not arrivals:
            # positions, knowledge and fields would all repeat next tick;
            # a settled guard can wall off the remaining targets for good
            status = "stalled"
            break

    return state.finalize(status), state
