"""Seeded dungeon worlds: rooms, L-corridors, clutter, then repair.

Generation carves non-overlapping rectangular rooms out of solid rock,
connects consecutive room centers with L-shaped corridors, sprinkles
rectangular obstacles inside the rooms, opens the first blocked cell of
every forbidden 2x2 diagonal block, and validates the result. Invalid
layouts retry with a derived sub-seed up to a fixed attempt limit. The
same (params, seed) always yields the same world.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .world import BLOCKED, FREE, Cell, GridWorld, WorldError, validate_world

_MAX_ATTEMPTS = 100
_ROOM_TRIES = 25
# obstacles keep this many free cells between themselves and the room
# walls so clutter never pinches a room passage down to a single cell
_OBSTACLE_MARGIN = 2


class GenerationFailed(WorldError):
    def __init__(self, seed: int, attempts: int):
        self.seed = seed
        self.attempts = attempts
        super().__init__(
            f"no valid dungeon for seed {seed} after {attempts} attempts")


@dataclass(frozen=True)
class DungeonParams:
    width: int
    height: int
    rooms: int = 8
    room_min: int = 5
    room_max: int = 12
    corridor_min: int = 1
    corridor_max: int = 3
    obstacles: int = 10
    obstacle_min: int = 1
    obstacle_max: int = 3


# benchmark presets pin corridors at width 3: a width-1 bend is itself a
# corner cell, and at width 2 the two corner cells at a corridor mouth sit
# side by side; a guard parked on every corner cell of such a cross-section
# permanently walls off everything behind it. At width 3 corner cells
# occupy only the outer lanes, so a passing lane always remains.
DEFAULT_PARAMS = {
    50: DungeonParams(50, 50, rooms=6, room_min=7, room_max=14,
                      corridor_min=3, obstacles=12, obstacle_max=2),
    100: DungeonParams(100, 100, rooms=10, room_min=8, room_max=22,
                       corridor_min=3, obstacles=24),
    250: DungeonParams(250, 250, rooms=16, room_min=14, room_max=40,
                       corridor_min=3, obstacles=48),
}

# a single near-full-size hall; large open worlds are where blind
# nearest-site fills exhaust their step budgets, because every free cell
# closer than the far clutter gets claimed before the last shadow resolves
HALL_PARAMS = {
    250: DungeonParams(250, 250, rooms=1, room_min=200, room_max=200,
                       obstacles=8, obstacle_max=3),
}


def world_filename(size: int, seed: int) -> str:
    return f"d{size}_{seed}.world"


def _carve_h(free: np.ndarray, xa: int, xb: int, y: int, cw: int) -> None:
    h = free.shape[0]
    y0 = max(0, min(y - cw // 2, h - cw))
    free[y0:y0 + cw, min(xa, xb):max(xa, xb) + 1] = FREE


def _carve_v(free: np.ndarray, ya: int, yb: int, x: int, cw: int) -> None:
    w = free.shape[1]
    x0 = max(0, min(x - cw // 2, w - cw))
    free[min(ya, yb):max(ya, yb) + 1, x0:x0 + cw] = FREE


def _repair(free: np.ndarray) -> None:
    """Open the first blocked cell (scan order) of every forbidden 2x2."""
    h, w = free.shape
    fixed = True
    while fixed:
        fixed = False
        for y in range(h - 1, 0, -1):
            for x in range(w - 1):
                nw = free[y, x]
                ne = free[y, x + 1]
                sw = free[y - 1, x]
                se = free[y - 1, x + 1]
                if not ((nw and se and not ne and not sw)
                        or (ne and sw and not nw and not se)):
                    continue
                if not nw:
                    free[y, x] = FREE
                elif not ne:
                    free[y, x + 1] = FREE
                elif not sw:
                    free[y - 1, x] = FREE
                else:
                    free[y - 1, x + 1] = FREE
                fixed = True


def _place_rooms(rng: np.random.Generator, params: DungeonParams,
                 free: np.ndarray) -> list[tuple[int, int, int, int]]:
    w, h = params.width, params.height
    rooms: list[tuple[int, int, int, int]] = []
    for _ in range(params.rooms):
        for _ in range(_ROOM_TRIES):
            rw = int(rng.integers(params.room_min, params.room_max + 1))
            rh = int(rng.integers(params.room_min, params.room_max + 1))
            if rw > w - 2 or rh > h - 2:
                continue
            x0 = int(rng.integers(1, w - rw))
            y0 = int(rng.integers(1, h - rh))
            # one cell of rock between rooms keeps them distinct
            if any(x0 < bx + bw + 1 and bx < x0 + rw + 1
                   and y0 < by + bh + 1 and by < y0 + rh + 1
                   for bx, by, bw, bh in rooms):
                continue
            free[y0:y0 + rh, x0:x0 + rw] = FREE
            rooms.append((x0, y0, rw, rh))
            break
    return rooms


def _place_obstacles(rng: np.random.Generator, params: DungeonParams,
                     free: np.ndarray,
                     rooms: list[tuple[int, int, int, int]]) -> None:
    m = _OBSTACLE_MARGIN
    for _ in range(params.obstacles):
        rx, ry, rw, rh = rooms[int(rng.integers(len(rooms)))]
        ow = int(rng.integers(params.obstacle_min, params.obstacle_max + 1))
        oh = int(rng.integers(params.obstacle_min, params.obstacle_max + 1))
        if rw < ow + 2 * m or rh < oh + 2 * m:
            continue
        x0 = rx + m + int(rng.integers(rw - ow - 2 * m + 1))
        y0 = ry + m + int(rng.integers(rh - oh - 2 * m + 1))
        free[y0:y0 + oh, x0:x0 + ow] = BLOCKED


def _attempt(params: DungeonParams, seed: int, attempt: int) -> GridWorld | None:
    rng = np.random.default_rng(np.random.SeedSequence([seed, attempt]))
    w, h = params.width, params.height
    free = np.full((h, w), BLOCKED, dtype=np.uint8)

    rooms = _place_rooms(rng, params, free)
    if not rooms:
        return None
    centers = [(x0 + rw // 2, y0 + rh // 2) for x0, y0, rw, rh in rooms]

    for i in range(1, len(centers)):
        cw = int(rng.integers(params.corridor_min, params.corridor_max + 1))
        x1, y1 = centers[i - 1]
        x2, y2 = centers[i]
        if rng.integers(2):
            _carve_h(free, x1, x2, y1, cw)
            _carve_v(free, y1, y2, x2, cw)
        else:
            _carve_v(free, y1, y2, x1, cw)
            _carve_h(free, x1, x2, y2, cw)

    _place_obstacles(rng, params, free, rooms)
    _repair(free)

    deployment = None
    for y in range(h - 1, -1, -1):
        row = free[y]
        for x in range(w):
            if row[x] == FREE:
                deployment = Cell(x, y)
                break
        if deployment is not None:
            break
    if deployment is None:
        return None
    world = GridWorld(w, h, free, deployment)
    try:
        validate_world(world)
    except WorldError:
        return None
    return world


def generate(params: DungeonParams, seed: int) -> GridWorld:
    for attempt in range(_MAX_ATTEMPTS):
        world = _attempt(params, seed, attempt)
        if world is not None:
            return world
    raise GenerationFailed(seed, _MAX_ATTEMPTS)
