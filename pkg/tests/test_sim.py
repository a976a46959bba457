"""Simulation runtime tests: lifecycle, ticks, collisions, metrics, log."""

import json

import numpy as np
import pytest

from guardgrid.cadence import cadence_run
from guardgrid.sim import (AgentBudgetExhausted, AgentState, CollisionConflict,
                           DeploymentOccupied, InvariantMode,
                           InvariantViolation, NotTerminal, RunConfig,
                           SimError, SimState, TimeBudgetExhausted, tick)
from guardgrid.visibility import fov
from guardgrid.world import Cell

from conftest import open_world, world


def config(**kw) -> RunConfig:
    base = dict(algorithm="cadence", seed=1, n_max=10, t_max=100)
    base.update(kw)
    return RunConfig(**base)


def state_on(w, **kw) -> SimState:
    return SimState(w, config(**kw))


# ---------------------------------------------------------------------------
# spawn


def test_spawn_fresh_state():
    s = state_on(open_world(3, 3))
    a = s.spawn()
    assert a.id == 0
    assert a.cell == Cell(0, 0)
    assert s.spawned_total == 1
    assert s.max_concurrent == 1


def test_spawn_on_occupied_deployment():
    s = state_on(open_world(3, 3))
    s.spawn()
    with pytest.raises(DeploymentOccupied):
        s.spawn()
    assert not s.can_spawn()


def test_spawn_past_agent_budget():
    s = state_on(open_world(4, 1), n_max=1)
    s.spawn()
    s.begin_tick()
    s.apply_moves({0: Cell(1, 0)})
    with pytest.raises(AgentBudgetExhausted):
        s.spawn()


def test_spawn_allowed_at_final_step_but_not_past():
    s = state_on(open_world(4, 1), t_max=1)
    s.spawn()
    s.begin_tick()
    s.apply_moves({0: Cell(1, 0)})
    s.spawn()                       # step == t_max still spawns
    with pytest.raises(TimeBudgetExhausted):
        s.begin_tick()
    s.apply_moves({0: Cell(2, 0), 1: Cell(1, 0)})
    s.step += 1                     # spawn guard for out-of-band callers
    with pytest.raises(TimeBudgetExhausted):
        s.spawn()


def test_known_starts_at_deployment_fov():
    w = world(["...###"] * 3 + ["......"] * 3, dep=(0, 0))
    s = state_on(w)
    assert s.known_count == len(fov(w, [Cell(0, 0)]))
    assert s.knows(Cell(5, 0))
    assert not s.knows(Cell(0, 5)) or s.known_count == w.free_count


# ---------------------------------------------------------------------------
# tick and moves


def test_tick_moves_one_agent_east():
    s = state_on(open_world(3, 1))
    s.spawn()
    tick(s, {0: Cell(1, 0)})
    assert s.step == 1
    assert s.agents[0].cell == Cell(1, 0)
    assert s.is_occupied(Cell(1, 0))
    assert not s.is_occupied(Cell(0, 0))


def test_tick_queue_shift_applies_atomically():
    s = state_on(open_world(5, 1), n_max=3)
    for cells in ([], [Cell(1, 0)], [Cell(2, 0), Cell(1, 0)]):
        moves = {aid: c for aid, c in zip(sorted(s.agents), cells)}
        if s.agents:
            s.begin_tick()
            s.apply_moves(moves)
        s.spawn()
    # agents 0,1,2 sit at x=2,1,0; shift the whole queue east in one tick
    tick(s, {0: Cell(3, 0), 1: Cell(2, 0), 2: Cell(1, 0)})
    assert [s.agents[i].cell.x for i in (0, 1, 2)] == [3, 2, 1]


def test_tick_same_target_collides():
    s = state_on(open_world(3, 3), n_max=2)
    s.spawn()
    s.begin_tick()
    s.apply_moves({0: Cell(1, 0)})
    s.spawn()
    s.begin_tick()
    s.apply_moves({0: Cell(1, 1)})    # make both adjacent to (0, 1)
    with pytest.raises(CollisionConflict):
        s.apply_moves({0: Cell(0, 1), 1: Cell(0, 1)})


def test_tick_swap_collides():
    s = state_on(open_world(3, 1), n_max=2)
    s.spawn()
    s.begin_tick()
    s.apply_moves({0: Cell(1, 0)})
    s.spawn()
    with pytest.raises(CollisionConflict):
        s.apply_moves({0: Cell(0, 0), 1: Cell(1, 0)})


def test_move_into_blocked_cell_rejected():
    s = state_on(world(["..", ".#"], dep=(0, 1)))
    s.spawn()
    s.begin_tick()
    with pytest.raises(CollisionConflict):
        s.apply_moves({0: Cell(1, 0)})


def test_move_must_be_adjacent():
    s = state_on(open_world(3, 3))
    s.spawn()
    s.begin_tick()
    with pytest.raises(CollisionConflict):
        s.apply_moves({0: Cell(2, 2)})


def test_stay_move_is_noop():
    s = state_on(open_world(3, 3))
    s.spawn()
    tick(s, {0: Cell(0, 0)})
    assert s.agents[0].cell == Cell(0, 0)
    assert s.events.count("move") == 0


# ---------------------------------------------------------------------------
# walkers


def test_walker_leaves_deployment_unreserved():
    s = state_on(open_world(4, 1), n_max=4)
    a = s.spawn_walker(Cell(3, 0))
    assert a.ghost
    assert not s.is_occupied(Cell(0, 0))
    assert s.can_spawn()


def test_walker_walks_through_parked_agent():
    s = state_on(open_world(4, 1), n_max=4)
    w0 = s.spawn_walker(Cell(3, 0))
    s.begin_tick()
    for x in (1, 2, 3):
        s.move_walker(w0.id, Cell(x, 0))
    s.land_walker(w0.id)
    assert s.is_occupied(Cell(3, 0))
    # second walker passes straight over the parked one
    w1 = s.spawn_walker(Cell(2, 0))
    s.begin_tick()
    for x in (1, 2):
        s.move_walker(w1.id, Cell(x, 0))
    s.land_walker(w1.id)
    assert s.is_occupied(Cell(2, 0))


def test_walker_landing_on_occupied_cell_collides():
    s = state_on(open_world(3, 1), n_max=4)
    w0 = s.spawn_walker(Cell(1, 0))
    s.begin_tick()
    s.move_walker(w0.id, Cell(1, 0))
    s.land_walker(w0.id)
    w1 = s.spawn_walker(Cell(1, 0))
    s.begin_tick()
    s.move_walker(w1.id, Cell(1, 0))
    with pytest.raises(CollisionConflict):
        s.land_walker(w1.id)


def test_move_walker_rejects_non_walker():
    s = state_on(open_world(3, 1))
    s.spawn()
    with pytest.raises(SimError):
        s.move_walker(0, Cell(1, 0))


# ---------------------------------------------------------------------------
# deallocation bookkeeping


def test_deallocate_adjacent_agent():
    s = state_on(open_world(3, 1))
    s.spawn()
    s.begin_tick()
    s.apply_moves({0: Cell(1, 0)})
    s.set_terminal(0)
    assert s.deallocate_agent(0) == 1
    assert 0 not in s.agents
    assert not s.is_occupied(Cell(1, 0))


def test_deallocate_return_length_detours_hole():
    # 5x5 ring around a hole: (0,0) -> (4,4) detours in 8 steps
    rows = []
    for y in reversed(range(5)):
        rows.append("".join(
            "#" if (2 <= x < 3 and 2 <= y < 3) else "." for x in range(5)))
    s = state_on(world(rows))
    a = s.spawn_walker(Cell(4, 4))
    s.begin_tick()
    for c in [(1, 0), (2, 0), (3, 0), (4, 0), (4, 1), (4, 2), (4, 3), (4, 4)]:
        s.move_walker(a.id, Cell(*c))
    s.land_walker(a.id)
    s.set_terminal(a.id)
    assert s.deallocate_agent(a.id) == 8


def test_deallocate_active_agent_rejected():
    s = state_on(open_world(3, 1))
    s.spawn()
    with pytest.raises(NotTerminal):
        s.deallocate_agent(0)
    with pytest.raises(NotTerminal):
        s.deallocate_agent(99)


# ---------------------------------------------------------------------------
# monitor


def test_monitor_records_connectivity_violation():
    w = world([".#.", ".#.", "..."], dep=(0, 2))
    s = state_on(w, invariant_mode=InvariantMode.RECORD)
    a = s.spawn_walker(Cell(2, 2))
    s.begin_tick()
    for c in [(0, 1), (0, 0), (1, 0), (2, 0), (2, 1), (2, 2)]:
        s.move_walker(a.id, Cell(*c))
    s.land_walker(a.id)
    s.check_connected([a.cell])
    assert s.monitor.violations == 1
    assert s.events.count("violation") == 1


def test_monitor_asserts_connectivity_violation():
    w = world([".#.", ".#.", "..."], dep=(0, 2))
    s = state_on(w, invariant_mode=InvariantMode.ASSERT)
    a = s.spawn_walker(Cell(2, 2))
    s.begin_tick()
    for c in [(0, 1), (0, 0), (1, 0), (2, 0), (2, 1), (2, 2)]:
        s.move_walker(a.id, Cell(*c))
    s.land_walker(a.id)
    with pytest.raises(InvariantViolation):
        s.check_connected([a.cell])


def test_monitor_coverage_monotone_violation():
    w = world([".#.", ".#.", "..."], dep=(0, 2))
    s = state_on(w, invariant_mode=InvariantMode.RECORD)
    a = s.spawn_walker(Cell(2, 2))
    s.begin_tick()
    for c in [(0, 1), (0, 0), (1, 0), (2, 0), (2, 1), (2, 2)]:
        s.move_walker(a.id, Cell(*c))
    s.land_walker(a.id)
    s.check_coverage_monotone([a.cell])     # absorbs the right leg
    before = s.monitor.violations
    # an empty contributor set no longer covers the right leg
    s.check_coverage_monotone([])
    assert s.monitor.violations == before + 1


def test_monitor_passes_when_coverage_held():
    s = state_on(open_world(4, 4))
    s.spawn()
    s.check_coverage_monotone([Cell(0, 0)])
    s.check_connected([Cell(0, 0)])
    assert s.monitor.violations == 0


# ---------------------------------------------------------------------------
# finalize


def test_finalize_convex_zero_agents():
    m = state_on(open_world(5, 4)).finalize()
    assert m.coverage_pct == 100.0
    assert m.final_agents == 1
    assert m.max_agents == 1
    assert m.lost_agents == 0
    assert m.steps == 0


def test_finalize_counts_pseudo_agent():
    s = state_on(open_world(5, 1), n_max=3)
    s.spawn()
    s.begin_tick()
    s.apply_moves({0: Cell(1, 0)})
    s.spawn()
    m = s.finalize()
    assert m.final_agents == 3
    assert m.max_agents == 3
    assert m.coverage_pct == 100.0


def test_finalize_flags_disconnected_agent_and_drops_its_fov():
    w = world(["...###"] * 3 + ["......"] * 3, dep=(1, 5))
    s = state_on(w, invariant_mode=InvariantMode.RECORD)
    a = s.spawn_walker(Cell(5, 1))
    s.begin_tick()
    for c in [(1, 4), (1, 3), (1, 2), (1, 1), (2, 1), (3, 1), (4, 1), (5, 1)]:
        s.move_walker(a.id, Cell(*c))
    s.land_walker(a.id)
    m = s.finalize()
    assert m.lost_agents == 1
    assert m.final_agents == 1
    expected = 100.0 * len(fov(w, [Cell(1, 5)])) / w.free_count
    assert m.coverage_pct == pytest.approx(expected)
    assert s.events.count("lost") == 1


# ---------------------------------------------------------------------------
# event log and determinism


def test_event_log_schema_and_tick_count():
    w = world(["....", "....", "...."], dep=(0, 0))
    run = RunConfig(algorithm="cadence", seed=3, n_max=10, t_max=100)
    metrics, s = cadence_run(w, run)
    rows = [json.loads(line) for line in s.events.dumps().splitlines()]
    assert all(list(r)[:4] == ["step", "kind", "agent", "cell"] for r in rows)
    assert sum(r["kind"] == "tick" for r in rows) == metrics.steps
    for r in rows:
        if r["kind"] == "dealloc":
            assert "return_len" in r


def test_run_repeats_byte_identical():
    w = world(["......", ".##...", "......", "...#..", "......"], dep=(0, 0))
    run = RunConfig(algorithm="cadence", seed=9, n_max=20, t_max=500)
    m1, s1 = cadence_run(w, run)
    m2, s2 = cadence_run(w, run)
    assert m1 == m2
    assert s1.events.dumps() == s2.events.dumps()


def test_rng_streams_split_by_purpose():
    s = state_on(open_world(3, 3), seed=42)
    a = s.rng(0).integers(0, 1 << 30, size=4)
    b = s.rng(0).integers(0, 1 << 30, size=4)
    c = s.rng(1).integers(0, 1 << 30, size=4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
