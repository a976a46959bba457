"""Simulation runtime: agents, ticks, event log, invariant monitor, metrics.

One tick is one global step. Agents occupy one free cell each; moves within
a tick apply atomically after collision validation (two agents may shift
along a queue in the same tick, but never land on the same cell or swap).
The deployment point x_d acts as a permanent pseudo-agent: it contributes
its field of view and counts one extra in the agent metrics.

Events are JSON lines with stable key order {step, kind, agent, cell};
``dealloc`` events append return_len, diagnostics append info.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _kernels as K
from .visibility import FovCache, build_visibility_graph, is_connected, popcount
from .world import Cell, GridWorld

RNG_DEPLOYMENT = 0
RNG_ISDA = 1


class SimError(Exception):
    pass


class DeploymentOccupied(SimError):
    pass


class AgentBudgetExhausted(SimError):
    pass


class TimeBudgetExhausted(SimError):
    pass


class CollisionConflict(SimError):
    """Two agents targeted the same cell or swapped cells in one tick.

    Signals an algorithm bug; runner moves must already be conflict-free.
    """


class NotTerminal(SimError):
    pass


class InvariantViolation(SimError):
    def __init__(self, name: str, step: int):
        self.name = name
        self.step = step
        super().__init__(f"invariant {name} violated at step {step}")


class InvariantMode(enum.Enum):
    ASSERT = "assert"
    RECORD = "record"


class AgentState(enum.Enum):
    ACTIVE = "active"
    TERMINAL = "terminal"


@dataclass
class Agent:
    id: int
    cell: Cell
    state: AgentState = AgentState.ACTIVE
    target: Cell | None = None
    spawn_step: int = 0
    ghost: bool = False      # moves without reserving cells (see spawn_walker)


@dataclass(frozen=True)
class RunConfig:
    algorithm: str
    seed: int
    n_max: int
    t_max: int
    invariant_mode: InvariantMode = InvariantMode.ASSERT
    constants: dict = field(default_factory=dict)


@dataclass
class RunMetrics:
    coverage_pct: float
    steps: int
    final_agents: int        # surviving connected agents + the pseudo-agent
    max_agents: int          # peak concurrent agents + the pseudo-agent
    lost_agents: int
    status: str = "ok"
    wall_time: float = 0.0


_EVENT_KEYS = ("step", "kind", "agent", "cell", "return_len", "info")


class EventLog:
    def __init__(self):
        self.rows: list[dict] = []

    def append(self, step: int, kind: str, agent: int | None,
               cell: Cell | None, **extra) -> None:
        row = {"step": step, "kind": kind, "agent": agent,
               "cell": None if cell is None else [int(cell[0]), int(cell[1])]}
        for k in ("return_len", "info"):
            if k in extra:
                row[k] = extra[k]
        self.rows.append(row)

    def count(self, kind: str) -> int:
        return sum(1 for r in self.rows if r["kind"] == kind)

    def dumps(self) -> str:
        return "".join(json.dumps(r, separators=(",", ":")) + "\n"
                       for r in self.rows)


class InvariantMonitor:
    def __init__(self, mode: InvariantMode, log: EventLog):
        self.mode = mode
        self.log = log
        self.violations = 0

    def check(self, ok: bool, name: str, step: int) -> None:
        if ok:
            return
        self.violations += 1
        self.log.append(step, "violation", None, None, info=name)
        if self.mode is InvariantMode.ASSERT:
            raise InvariantViolation(name, step)


class SimState:
    def __init__(self, world: GridWorld, config: RunConfig,
                 cache: FovCache | None = None):
        self.world = world
        self.config = config
        self.cache = cache or FovCache(world)
        self.agents: dict[int, Agent] = {}
        self.next_id = 0
        self.step = 0
        self.occupancy = np.full((world.height, world.width), -1, dtype=np.int32)
        self.known_bits = np.zeros(world.n_words, dtype=np.uint64)
        self.known_mask = np.zeros((world.height, world.width), dtype=bool)
        self.known_count = 0
        self.max_concurrent = 0
        self.spawned_total = 0
        self.events = EventLog()
        self.monitor = InvariantMonitor(config.invariant_mode, self.events)
        self._dep_dist: np.ndarray | None = None
        # x_d observes from the start
        self.absorb_bits(self.cache.get_bits(world.deployment))

    # -- helpers -----------------------------------------------------------

    def rng(self, purpose: int) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence([self.config.seed, purpose]))

    def live_agents(self) -> list[Agent]:
        return [self.agents[i] for i in sorted(self.agents)]

    def member_cells(self) -> list[Cell]:
        """Cells of x_d plus every live agent, ascending id; x_d first."""
        return [self.world.deployment] + [a.cell for a in self.live_agents()]

    def is_occupied(self, cell: Cell) -> bool:
        return self.occupancy[cell[1], cell[0]] >= 0

    def knows(self, cell: Cell) -> bool:
        return bool(self.known_mask[cell[1], cell[0]])

    def absorb_bits(self, words: np.ndarray) -> None:
        added = words & ~self.known_bits
        if not added.any():
            return
        self.known_bits |= words
        w = self.world.width
        for wd in np.nonzero(added)[0]:
            m = int(added[wd])
            base = int(wd) << 6
            while m:
                low = m & -m
                idx = base + low.bit_length() - 1
                self.known_mask[idx // w, idx % w] = True
                m ^= low
        self.known_count = popcount(self.known_bits)

    def union_bits(self, cells: Iterable[Cell]) -> np.ndarray:
        out = np.zeros(self.world.n_words, dtype=np.uint64)
        for c in cells:
            out |= self.cache.get_bits(c)
        return out

    def deployment_distances(self) -> np.ndarray:
        if self._dep_dist is None:
            from .world import bfs_distance_field
            self._dep_dist = bfs_distance_field(self.world, self.world.deployment)
        return self._dep_dist

    def can_spawn(self) -> bool:
        return (not self.is_occupied(self.world.deployment)
                and len(self.agents) < self.config.n_max
                and self.step <= self.config.t_max)

    # -- core operations -----------------------------------------------------

    def begin_tick(self) -> None:
        if self.step + 1 > self.config.t_max:
            raise TimeBudgetExhausted(f"tick past t_max={self.config.t_max}")
        self.step += 1
        self.events.append(self.step, "tick", None, None)

    def spawn(self, target: Cell | None = None) -> Agent:
        dep = self.world.deployment
        if self.is_occupied(dep):
            raise DeploymentOccupied(f"deployment {tuple(dep)} occupied")
        if len(self.agents) >= self.config.n_max:
            raise AgentBudgetExhausted(f"n_max={self.config.n_max} live agents")
        if self.step > self.config.t_max:
            raise TimeBudgetExhausted(f"spawn after t_max={self.config.t_max}")
        agent = Agent(self.next_id, dep, AgentState.ACTIVE, target, self.step)
        self.next_id += 1
        self.agents[agent.id] = agent
        self.occupancy[dep.y, dep.x] = agent.id
        self.spawned_total += 1
        self.max_concurrent = max(self.max_concurrent, len(self.agents))
        self.events.append(self.step, "spawn", agent.id, dep)
        return agent

    def spawn_walker(self, target: Cell) -> Agent:
        """Spawn an agent that traverses the known region without reserving
        cells, so parked guards never block it. Landing reclaims sole
        occupancy of the destination."""
        agent = self.spawn(target)
        dep = self.world.deployment
        self.occupancy[dep.y, dep.x] = -1
        agent.ghost = True
        return agent

    def move_walker(self, agent_id: int, cell: Cell) -> None:
        agent = self.agents[agent_id]
        cell = Cell(int(cell[0]), int(cell[1]))
        if not agent.ghost:
            raise SimError(f"agent {agent_id} is not a walker")
        if not self.world.is_free(cell):
            raise CollisionConflict(
                f"agent {agent_id} move into non-free cell {tuple(cell)}")
        if abs(cell.x - agent.cell.x) + abs(cell.y - agent.cell.y) != 1:
            raise CollisionConflict(
                f"agent {agent_id} move {tuple(agent.cell)} -> {tuple(cell)} "
                "is not 4-adjacent")
        agent.cell = cell
        self.events.append(self.step, "move", agent_id, cell)

    def land_walker(self, agent_id: int) -> None:
        agent = self.agents[agent_id]
        cell = agent.cell
        if self.occupancy[cell.y, cell.x] >= 0:
            raise CollisionConflict(
                f"walker {agent_id} landing on occupied cell {tuple(cell)}")
        self.occupancy[cell.y, cell.x] = agent_id
        agent.ghost = False

    def apply_moves(self, moves: dict[int, Cell]) -> None:
        """Apply all declared moves atomically; stay-moves may be omitted.

        Raises CollisionConflict when two agents end on one cell or exchange
        cells; move events are logged in ascending agent id.
        """
        real: dict[int, Cell] = {}
        for aid, cell in moves.items():
            agent = self.agents[aid]
            cell = Cell(int(cell[0]), int(cell[1]))
            if cell == agent.cell:
                continue
            if not self.world.is_free(cell):
                raise CollisionConflict(
                    f"agent {aid} move into non-free cell {tuple(cell)}")
            if abs(cell.x - agent.cell.x) + abs(cell.y - agent.cell.y) != 1:
                raise CollisionConflict(
                    f"agent {aid} move {tuple(agent.cell)} -> {tuple(cell)} "
                    "is not 4-adjacent")
            real[aid] = cell

        final: dict[int, Cell] = {a.id: a.cell for a in self.agents.values()}
        final.update(real)
        seen: dict[Cell, int] = {}
        for aid in sorted(final):
            cell = final[aid]
            if cell in seen:
                raise CollisionConflict(
                    f"agents {seen[cell]} and {aid} both end on {tuple(cell)}")
            seen[cell] = aid
        for aid, cell in real.items():
            old = self.agents[aid].cell
            other = self.occupancy[cell.y, cell.x]
            if other >= 0 and other != aid and real.get(int(other)) == old:
                raise CollisionConflict(f"agents {aid} and {other} swap cells")

        for aid in sorted(real):
            agent = self.agents[aid]
            old = agent.cell
            self.occupancy[old.y, old.x] = -1
            agent.cell = real[aid]
        for aid in sorted(real):
            agent = self.agents[aid]
            self.occupancy[agent.cell.y, agent.cell.x] = aid
            self.events.append(self.step, "move", aid, agent.cell)

    def set_terminal(self, agent_id: int) -> None:
        agent = self.agents[agent_id]
        agent.state = AgentState.TERMINAL
        self.events.append(self.step, "terminal", agent_id, agent.cell)

    def deallocate_agent(self, agent_id: int) -> int:
        """Remove a terminal agent instantly; returns the logged return-path
        length (BFS over free cells back to the deployment point)."""
        agent = self.agents.get(agent_id)
        if agent is None or agent.state is not AgentState.TERMINAL:
            raise NotTerminal(f"agent {agent_id} is not terminal")
        dist = self.deployment_distances()
        return_len = int(dist[agent.cell.y, agent.cell.x])
        self.occupancy[agent.cell.y, agent.cell.x] = -1
        del self.agents[agent_id]
        self.events.append(self.step, "dealloc", agent_id, agent.cell,
                           return_len=return_len)
        return return_len

    # -- invariant checks ----------------------------------------------------

    def check_coverage_monotone(self, contributors: Sequence[Cell],
                                fresh: np.ndarray | None = None) -> np.ndarray:
        """Assert fov(contributors + x_d) still covers everything known,
        then absorb it. Returns the fresh union; callers that maintain the
        union incrementally may pass it to skip the recompute."""
        if fresh is None:
            cells = [self.world.deployment] + [Cell(*c) for c in contributors]
            fresh = self.union_bits(cells)
        ok = not bool((self.known_bits & ~fresh).any())
        self.monitor.check(ok, "coverage_monotone", self.step)
        self.absorb_bits(fresh)
        return fresh

    def check_connected(self, contributors: Sequence[Cell],
                        fresh_union: np.ndarray | None = None) -> None:
        """Assert the visibility graph over all members + x_d is connected.

        Fast path: the contributor subgraph is connected via cached bitmaps
        and every remaining member sits in the contributors' union FOV
        (hence has an edge to a contributor). Falls back to the full
        pairwise graph before reporting a violation.
        """
        ok = self._connected_fast(contributors, fresh_union)
        if not ok:
            members = self.member_cells()
            ok = is_connected(build_visibility_graph(self.world, members))
        self.monitor.check(ok, "visibility_connected", self.step)

    def _connected_fast(self, contributors: Sequence[Cell],
                        fresh_union: np.ndarray | None) -> bool:
        world = self.world
        cells = [world.deployment] + [Cell(*c) for c in contributors]
        m = len(cells)
        rows = np.empty((m, world.n_words), dtype=np.uint64)
        for i, c in enumerate(cells):
            rows[i] = self.cache.get_bits(c)
        flat = np.array([world.cell_index(c) for c in cells], dtype=np.int64)
        seen = np.zeros(m, dtype=np.uint8)
        K.reach_mask(rows, flat, 0, seen)
        if not bool(seen.all()):
            return False
        union = (fresh_union if fresh_union is not None
                 else np.bitwise_or.reduce(rows, axis=0))
        contributor_set = {(c.x, c.y) for c in cells}
        for agent in self.live_agents():
            if (agent.cell.x, agent.cell.y) in contributor_set:
                continue
            if not K.test_bit(union, world.cell_index(agent.cell)):
                return False
        return True

    # -- metrics ---------------------------------------------------------------

    def finalize(self, status: str = "ok") -> RunMetrics:
        """Compute final metrics; flags and excludes agents outside the
        deployment point's visibility component."""
        world = self.world
        survivors = self.live_agents()
        cells = [world.deployment] + [a.cell for a in survivors]
        m = len(cells)
        rows = np.empty((m, world.n_words), dtype=np.uint64)
        for i, c in enumerate(cells):
            rows[i] = self.cache.get_bits(c)
        flat = np.array([world.cell_index(c) for c in cells], dtype=np.int64)
        seen = np.zeros(m, dtype=np.uint8)
        K.reach_mask(rows, flat, 0, seen)
        connected = [survivors[i - 1] for i in range(1, m) if seen[i]]
        lost = [survivors[i - 1] for i in range(1, m) if not seen[i]]
        for agent in lost:
            self.events.append(self.step, "lost", agent.id, agent.cell)
        cov = np.zeros(world.n_words, dtype=np.uint64)
        cov |= rows[0]
        for i in range(1, m):
            if seen[i]:
                cov |= rows[i]
        coverage = 100.0 * popcount(cov) / world.free_count
        return RunMetrics(
            coverage_pct=coverage,
            steps=self.step,
            final_agents=len(connected) + 1,
            max_agents=self.max_concurrent + 1,
            lost_agents=len(lost),
            status=status,
        )


def tick(state: SimState, moves: dict[int, Cell]) -> None:
    """Advance one step: applies the declared moves atomically, accumulates
    the members' field of view into known, and evaluates the monitor."""
    state.begin_tick()
    state.apply_moves(moves)
    contributors = [a.cell for a in state.live_agents()]
    fresh = state.union_bits([state.world.deployment] + contributors)
    state.absorb_bits(fresh)
    state.check_connected(contributors, fresh)
