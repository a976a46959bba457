"""Frontier-chasing deployment driven by a shared rally cell.

All agents descend a shortest-path field toward a single frontier target
x*, chosen on the border of the known region to minimise the summed
distances to every member including the deployment point. The target is
kept until the border ceases to contain it. When the deployment cell is
occupied, a queue jump shifts the whole chain one step closer to x*;
otherwise each agent declares a strictly closer move on its own pruned
graph and a conflict-resolution pass reverts moves until the tick is
collision-free and preserves both accumulated coverage and a connected
visibility graph. Reverted agents prune the offending edge; pruned
graphs reset on every spawn and retarget. A spawn fires when a tick
produces no movement or when coverage stalls for t_h consecutive ticks,
t_h being the ceiling of the mean member distance to x*.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from . import _kernels as K
from .dealloc import Deallocator
from .sim import AgentState, RunConfig, RunMetrics, SimError, SimState
from .visibility import FovCache
from .world import (NEIGHBOUR_STEPS, Cell, GridWorld, _as_domain,
                    bfs_distance_field, border)

_UNREACHABLE_PENALTY = 1 << 20
_DIR_BIT = {step: 1 << k for k, step in enumerate(NEIGHBOUR_STEPS)}


def _edge(u: Cell, v: Cell) -> tuple[Cell, Cell]:
    """Normalised undirected square-graph edge."""
    return (u, v) if (u.y, u.x) <= (v.y, v.x) else (v, u)


def _banned_grid(shape: tuple[int, int],
                 edges: set[tuple[Cell, Cell]]) -> np.ndarray:
    g = np.zeros(shape, dtype=np.uint8)
    for u, v in edges:
        step = (v.x - u.x, v.y - u.y)
        g[u.y, u.x] |= _DIR_BIT[step]
        g[v.y, v.x] |= _DIR_BIT[(-step[0], -step[1])]
    return g


class NoCloserFreeChain(SimError):
    """The chain out of the deployment cell hit a link with no strictly
    closer known neighbour."""


def select_target(world: GridWorld, known_mask: np.ndarray,
                  members: Sequence[Cell],
                  border_cells: Sequence[Cell]) -> Cell | None:
    """Border cell minimising summed known-region distances to members.

    Ties break toward larger y then smaller x. Cells unreachable from the
    first member (the deployment point) are skipped; other unreachable
    members contribute a large fixed penalty instead, so fully reachable
    cells always win.
    """
    if not border_cells:
        return None
    h, w = known_mask.shape
    total = np.zeros((h, w), dtype=np.int64)
    skip = np.zeros((h, w), dtype=bool)
    for i, m in enumerate(members):
        f = bfs_distance_field(world, Cell(*m), known_mask)
        bad = f < 0
        if i == 0:
            skip |= bad
        total += np.where(bad, _UNREACHABLE_PENALTY, f)
    best, best_val = None, None
    for c in border_cells:          # already ordered y desc, x asc
        if skip[c.y, c.x]:
            continue
        val = int(total[c.y, c.x])
        if best_val is None or val < best_val:
            best, best_val = c, val
    return best


def queue_jump(world: GridWorld, positions: dict[int, Cell], x_d: Cell,
               field: np.ndarray) -> list[tuple[int, Cell]]:
    """Shift the chain of agents starting on the deployment cell one step
    down the x* field; every occupied link pushes onto the next strictly
    closer cell until a free one absorbs the chain. Raises
    NoCloserFreeChain when a link has no strictly closer known neighbour.
    """
    by_cell = {Cell(*c): aid for aid, c in positions.items()}
    chain: list[tuple[int, Cell]] = []
    cur = Cell(*x_d)
    while cur in by_cell:
        d = int(field[cur.y, cur.x])
        nxt = None
        for dx, dy in NEIGHBOUR_STEPS:
            nc = Cell(cur.x + dx, cur.y + dy)
            if not (0 <= nc.x < world.width and 0 <= nc.y < world.height):
                continue
            if d > 0 and int(field[nc.y, nc.x]) == d - 1:
                nxt = nc
                break
        if nxt is None:
            raise NoCloserFreeChain(f"no progress from {tuple(cur)}")
        chain.append((by_cell[cur], nxt))
        cur = nxt
    return chain


def resolve_conflicts(world: GridWorld, cache: FovCache,
                      positions: dict[int, Cell], declared: dict[int, Cell],
                      known_bits: np.ndarray, x_d: Cell,
                      cover: np.ndarray | None = None,
                      ) -> tuple[dict[int, Cell], list[int]]:
    """Prune a declared move set down to a valid tick.

    First collisions: a move onto a stationary agent, onto the cell a
    lower-id mover already won, or half of a swap (higher id yields) is
    reverted, cascading until stable. Then invariants: survivors are
    validated in ascending id against the configuration where lower-id
    survivors have already moved and everyone else still stands; a move
    whose departure would drop a known cell out of the instantaneous
    union FOV, or would disconnect the visibility graph over members plus
    the deployment point, reverts to Stay. Only the offending mover pays.
    Coverage is validated through per-cell cover counts; `cover` must
    hold the counts of the pre-move configuration (members plus the
    deployment point) and is updated to the surviving configuration on
    return, or is built from scratch when omitted. Connectivity rechecks
    run per mover only on the rare ticks where the jointly validated
    configuration ends up disconnected. Returns the surviving moves and
    the reverted ids in reversion order.
    """
    moves = {aid: Cell(*c) for aid, c in declared.items()}
    reverted: list[int] = []
    ids = sorted(positions)
    if cover is None:
        cover = np.zeros(world.n_bits, dtype=np.int32)
        K.counts_add(cache.get_bits(Cell(*x_d)), cover, 1)
        for aid in ids:
            K.counts_add(cache.get_bits(Cell(*positions[aid])), cover, 1)

    def settle_collisions() -> None:
        # reverting one mover can strand a chain that followed it, so
        # rounds repeat, each dropping the lowest-id loser, until stable
        while True:
            stat_cells = {Cell(*positions[o]) for o in ids if o not in moves}
            mover_at: dict[Cell, int] = {}
            first_to: dict[Cell, int] = {}
            for o in sorted(moves):
                mover_at[Cell(*positions[o])] = o
                first_to.setdefault(moves[o], o)
            loser = None
            for aid in sorted(moves):
                tgt = moves[aid]
                if tgt in stat_cells or first_to[tgt] < aid:
                    loser = aid
                    break
                partner = mover_at.get(tgt)
                if (partner is not None and partner < aid
                        and moves[partner] == Cell(*positions[aid])):
                    loser = aid         # swap, higher id yields
                    break
            if loser is None:
                return
            del moves[loser]
            reverted.append(loser)

    m = len(ids) + 1
    rows = np.empty((m, world.n_words), dtype=np.uint64)
    flat = np.empty(m, dtype=np.int64)
    seen = np.empty(m, dtype=np.uint8)
    slot = {aid: i + 1 for i, aid in enumerate(ids)}

    def fill_rows() -> None:
        rows[0] = cache.get_bits(Cell(*x_d))
        flat[0] = world.cell_index(x_d)
        for i, aid in enumerate(ids):
            c = Cell(*positions[aid])
            rows[i + 1] = cache.get_bits(c)
            flat[i + 1] = world.cell_index(c)

    def all_reached() -> bool:
        seen[:] = 0
        K.reach_mask(rows, flat, 0, seen)
        return bool(seen.all())

    def greedy_pass(check_connect: bool) -> bool:
        """Validate surviving moves in ascending id; revert offenders.
        Leaves `cover` back at the pre-move configuration. Returns True
        when anyone was reverted."""
        applied: list[tuple[np.ndarray, np.ndarray]] = []
        any_revert = False
        if check_connect:
            fill_rows()
        for aid in sorted(moves):
            old_cell = Cell(*positions[aid])
            new_cell = moves[aid]
            old_row = cache.get_bits(old_cell)
            new_row = cache.get_bits(new_cell)
            holes = K.counts_move(old_row, new_row, cover, known_bits)
            ok = holes <= 0
            if ok and check_connect:
                j = slot[aid]
                rows[j] = new_row
                flat[j] = world.cell_index(new_cell)
                ok = all_reached()
                if not ok:
                    rows[j] = old_row
                    flat[j] = world.cell_index(old_cell)
            if ok:
                applied.append((old_row, new_row))
            else:
                K.counts_move(new_row, old_row, cover, known_bits)
                del moves[aid]
                reverted.append(aid)
                any_revert = True
        for old_row, new_row in reversed(applied):
            K.counts_move(new_row, old_row, cover, known_bits)
        return any_revert

    settle_collisions()
    while True:
        if greedy_pass(False):
            settle_collisions()
            continue
        fill_rows()
        for aid, tgt in moves.items():
            rows[slot[aid]] = cache.get_bits(tgt)
            flat[slot[aid]] = world.cell_index(tgt)
        if all_reached():
            break
        # the start configuration was connected, so some single move in
        # the ascending replay must be the first to cut the graph
        if not greedy_pass(True):
            raise SimError("conflict resolution exhausted all moves")
        settle_collisions()
    for aid in sorted(moves):
        K.counts_move(cache.get_bits(Cell(*positions[aid])),
                      cache.get_bits(moves[aid]), cover, known_bits)
    return moves, reverted


def _stall_threshold(field: np.ndarray, members: Sequence[Cell]) -> int:
    dists = [int(field[c.y, c.x]) for c in members
             if field[c.y, c.x] >= 0]
    if not dists:
        return 1
    return max(1, math.ceil(sum(dists) / len(dists)))


def dadence_run(world: GridWorld, config: RunConfig,
                cache: FovCache | None = None) -> tuple[RunMetrics, SimState]:
    state = SimState(world, config, cache)
    dep = world.deployment
    pruned: dict[int, set[tuple[Cell, Cell]]] = {}
    x_star: Cell | None = None
    field: np.ndarray | None = None
    field_epoch = -1
    target_rev = 0
    own_field: dict[int, np.ndarray] = {}
    own_epoch: dict[int, tuple[int, int, int]] = {}
    stall = 0
    prev_known = state.known_count
    # per-cell cover counts of members + x_d, kept in lockstep with every
    # spawn and applied move so conflict validation never rebuilds them
    cover = np.zeros(world.n_bits, dtype=np.int32)
    K.counts_add(state.cache.get_bits(dep), cover, 1)
    domain: np.ndarray | None = None
    domain_epoch = -1
    qx = np.empty(world.n_bits, dtype=np.int32)
    qy = np.empty(world.n_bits, dtype=np.int32)

    def known_domain() -> np.ndarray:
        nonlocal domain, domain_epoch
        if domain is None or domain_epoch != state.known_count:
            domain = _as_domain(world, state.known_mask)
            domain_epoch = state.known_count
        return domain

    def refresh_field() -> np.ndarray:
        nonlocal field, field_epoch
        if field is None or field_epoch != state.known_count:
            field = bfs_distance_field(world, x_star, state.known_mask)
            field_epoch = state.known_count
        return field

    def agent_field(aid: int) -> np.ndarray:
        """Distance field to x* on the agent's own pruned graph; agents
        with nothing pruned share the plain field."""
        veto = pruned[aid]
        if not veto:
            return refresh_field()
        epoch = (target_rev, state.known_count, len(veto))
        if own_epoch.get(aid) != epoch:
            dist = own_field.get(aid)
            if dist is None:
                dist = np.empty((world.height, world.width), dtype=np.int32)
                own_field[aid] = dist
            dist.fill(-1)
            K.bfs_fill_banned(
                known_domain(), int(x_star[0]), int(x_star[1]),
                _banned_grid((world.height, world.width), veto),
                dist, qx, qy)
            own_epoch[aid] = epoch
        return own_field[aid]

    status = "ok"
    while state.known_count < world.free_count:
        if state.step >= config.t_max:
            status = "budget"
            break
        border_cells = border(world, state.known_mask)
        border_set = set(border_cells)

        if not state.agents:
            if not state.can_spawn():
                status = "budget"
                break
            state.begin_tick()
            agent = state.spawn()
            K.counts_add(state.cache.get_bits(agent.cell), cover, 1)
            pruned[agent.id] = set()
            stall = 0
            fresh = state.check_coverage_monotone([agent.cell])
            state.check_connected([agent.cell], fresh)
            prev_known = state.known_count
            continue

        state.begin_tick()
        if x_star is None or x_star not in border_set:
            x_star = select_target(world, state.known_mask,
                                   state.member_cells(), border_cells)
            field = None
            target_rev += 1
            for s in pruned.values():
                s.clear()
            state.events.append(state.step, "target", None, x_star)

        moved = False
        if x_star is not None:
            f = refresh_field()
            if state.is_occupied(dep):
                positions = {a.id: a.cell for a in state.live_agents()}
                try:
                    chain = queue_jump(world, positions, dep, f)
                except NoCloserFreeChain:
                    chain = []
                if chain:
                    for aid, nc in chain:
                        K.counts_move(state.cache.get_bits(positions[aid]),
                                      state.cache.get_bits(nc), cover,
                                      state.known_bits)
                    state.apply_moves(dict(chain))
                    moved = True
            else:
                declared: dict[int, Cell] = {}
                for agent in state.live_agents():
                    veto = pruned.setdefault(agent.id, set())
                    fi = agent_field(agent.id)
                    d = int(fi[agent.cell.y, agent.cell.x])
                    if d <= 0:
                        continue
                    for dx, dy in NEIGHBOUR_STEPS:
                        nc = Cell(agent.cell.x + dx, agent.cell.y + dy)
                        if not (0 <= nc.x < world.width
                                and 0 <= nc.y < world.height):
                            continue
                        if int(fi[nc.y, nc.x]) != d - 1:
                            continue
                        # a removed edge can still border two cells whose
                        # banned-graph distances differ by one
                        if veto and _edge(agent.cell, nc) in veto:
                            continue
                        declared[agent.id] = nc
                        break
                if declared:
                    positions = {a.id: a.cell for a in state.live_agents()}
                    moves, reverted = resolve_conflicts(
                        world, state.cache, positions, declared,
                        state.known_bits, dep, cover)
                    for aid in reverted:
                        pruned[aid].add(_edge(positions[aid], declared[aid]))
                        state.events.append(state.step, "revert", aid,
                                            declared[aid], info="conflict")
                    if moves:
                        state.apply_moves(moves)
                        moved = True

        contributors = [a.cell for a in state.live_agents()]
        fresh = state.check_coverage_monotone(contributors)
        state.check_connected(contributors, fresh)

        stall = 0 if state.known_count > prev_known else stall + 1
        spawned = False
        # t_h averages over the agents themselves, not the deployment point
        if not moved or (x_star is not None
                         and stall >= _stall_threshold(refresh_field(),
                                                       contributors)):
            if state.can_spawn():
                agent = state.spawn()
                K.counts_add(state.cache.get_bits(agent.cell), cover, 1)
                for s in pruned.values():
                    s.clear()
                pruned[agent.id] = set()
                stall = 0
                spawned = True
        if not moved and not spawned and (x_star is None
                                          or x_star in border_set):
            # same occupancy, knowledge and target next tick: a fixed point
            status = "stalled"
            break
        prev_known = state.known_count

    if state.known_count >= world.free_count:
        status = "ok"
        dealloc = Deallocator(world, state.cache, dep)
        for agent in state.live_agents():
            state.set_terminal(agent.id)
            dealloc.add(agent.id, agent.cell)
        for key in dealloc.sweep()[0]:
            state.deallocate_agent(key)
    return state.finalize(status), state
