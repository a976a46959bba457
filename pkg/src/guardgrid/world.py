"""Grid worlds: orthogonal free/blocked cell maps with corner analysis.

Coordinates are (x, y) with y increasing upward; row 0 is the bottom row.
World files list the top row first, so parsing reverses row order. A cell
(x, y) embeds as the closed unit square centred on (x, y). Lattice points
(px, py) with 0 <= px <= width, 0 <= py <= height sit between cells; the
point (px, py) touches cells (px-1, py-1), (px, py-1), (px-1, py), (px, py),
with out-of-grid cells treated as blocked (the virtual outer frame).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels as K

FREE = 1
BLOCKED = 0

# Deterministic neighbour order used everywhere: N, E, S, W.
NEIGHBOUR_STEPS = ((0, 1), (1, 0), (0, -1), (-1, 0))


class Cell(NamedTuple):
    x: int
    y: int


class WorldError(Exception):
    """Base class for world validity and format errors."""


class WorldFormatError(WorldError):
    pass


class ForbiddenDiagonal(WorldError):
    """A 2x2 block has two free cells meeting only diagonally."""

    def __init__(self, px: int, py: int):
        self.px = px
        self.py = py
        super().__init__(f"forbidden diagonal at lattice point ({px}, {py})")


class DisconnectedFreeSpace(WorldError):
    def __init__(self, component_count: int):
        self.component_count = component_count
        super().__init__(f"free space has {component_count} components")


class DeploymentBlocked(WorldError):
    pass


class CornerKind(enum.Enum):
    CONVEX90 = "convex90"
    REFLEX270 = "reflex270"


class ComponentKind(enum.Enum):
    OUTER = "outer"
    HOLE = "hole"


# Sentinel component id for corners formed purely by the virtual frame.
FRAME_COMPONENT = -1


@dataclass(frozen=True)
class CornerPoint:
    px: int
    py: int
    kind: CornerKind
    agent_cell: Cell
    blocked_component_id: int
    is_valid: bool


@dataclass(frozen=True)
class BlockedComponent:
    id: int
    kind: ComponentKind
    cells: tuple[Cell, ...]


@dataclass(frozen=True)
class WorldAnalysis:
    n: int                      # all 90/270 corners
    h: int                      # hole count
    m_refl: int                 # (n + 4h - 4) / 2
    m_valid: int                # (n + 2h - 4) / 2
    corners: tuple[CornerPoint, ...]
    components: tuple[BlockedComponent, ...]

    @property
    def reflex_corners(self) -> tuple[CornerPoint, ...]:
        return tuple(c for c in self.corners if c.kind is CornerKind.REFLEX270)

    @property
    def valid_corners(self) -> tuple[CornerPoint, ...]:
        return tuple(c for c in self.corners if c.is_valid)


@dataclass
class GridWorld:
    width: int
    height: int
    free: np.ndarray           # uint8 [height, width], indexed [y, x]
    deployment: Cell
    _free_count: int = field(default=-1, repr=False)
    _scan_free: tuple[Cell, ...] | None = field(default=None, repr=False)

    def __post_init__(self):
        self.free = np.ascontiguousarray(self.free, dtype=np.uint8)
        if self.free.shape != (self.height, self.width):
            raise WorldFormatError("grid shape does not match declared size")
        self.deployment = Cell(*self.deployment)

    # -- basic queries -----------------------------------------------------

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def is_free(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and self.free[cell[1], cell[0]] == FREE

    @property
    def free_count(self) -> int:
        if self._free_count < 0:
            self._free_count = int(self.free.sum())
        return self._free_count

    @property
    def n_bits(self) -> int:
        return self.width * self.height

    @property
    def n_words(self) -> int:
        return (self.n_bits + 63) // 64

    def cell_index(self, cell: Cell) -> int:
        return cell[1] * self.width + cell[0]

    def scan_free_cells(self) -> tuple[Cell, ...]:
        """Free cells in reading order of the world file (top row first)."""
        if self._scan_free is None:
            out = []
            for y in range(self.height - 1, -1, -1):
                row = self.free[y]
                for x in range(self.width):
                    if row[x] == FREE:
                        out.append(Cell(x, y))
            self._scan_free = tuple(out)
        return self._scan_free


# ---------------------------------------------------------------------------
# validity

def validate_world(world: GridWorld) -> None:
    """Raise unless the world satisfies every validity rule.

    Checks, in order: at least one free cell, no forbidden 2x2 diagonal,
    free space 4-connected, deployment cell free. The first violating 2x2
    block is reported by its central lattice point, scanning top row first.
    """
    free = world.free
    if world.free_count == 0:
        raise DisconnectedFreeSpace(0)
    for py in range(world.height - 1, 0, -1):
        for px in range(1, world.width):
            ll = free[py - 1, px - 1]
            lr = free[py - 1, px]
            ul = free[py, px - 1]
            ur = free[py, px]
            if ll == FREE and ur == FREE and lr == BLOCKED and ul == BLOCKED:
                raise ForbiddenDiagonal(px, py)
            if lr == FREE and ul == FREE and ll == BLOCKED and ur == BLOCKED:
                raise ForbiddenDiagonal(px, py)
    comps = _free_component_count(world)
    if comps != 1:
        raise DisconnectedFreeSpace(comps)
    if not world.is_free(world.deployment):
        raise DeploymentBlocked(f"deployment {tuple(world.deployment)} is not free")


def _free_component_count(world: GridWorld) -> int:
    dist = np.full((world.height, world.width), -1, dtype=np.int32)
    qx = np.empty(world.n_bits, dtype=np.int32)
    qy = np.empty(world.n_bits, dtype=np.int32)
    count = 0
    for y in range(world.height - 1, -1, -1):
        for x in range(world.width):
            if world.free[y, x] == FREE and dist[y, x] < 0:
                count += 1
                K.bfs_fill(world.free, x, y, dist, qx, qy)
    return count


# ---------------------------------------------------------------------------
# blocked components / holes

def find_holes(world: GridWorld) -> list[BlockedComponent]:
    """4-connected blocked components, tagged Outer (touches the frame) or Hole.

    Components are discovered scanning in file reading order, which fixes
    their ids. Under the no-diagonal rule 4- and 8-connected partitions of
    blocked cells coincide.
    """
    blocked = (world.free == BLOCKED).astype(np.uint8)
    dist = np.full((world.height, world.width), -1, dtype=np.int32)
    qx = np.empty(world.n_bits, dtype=np.int32)
    qy = np.empty(world.n_bits, dtype=np.int32)
    comps: list[BlockedComponent] = []
    for y in range(world.height - 1, -1, -1):
        for x in range(world.width):
            if blocked[y, x] and dist[y, x] < 0:
                before = dist < 0
                K.bfs_fill(blocked, x, y, dist, qx, qy)
                ys, xs = np.nonzero(before & (dist >= 0))
                cells = tuple(
                    Cell(int(cx), int(cy))
                    for cy, cx in sorted(zip(ys.tolist(), xs.tolist()),
                                         key=lambda p: (-p[0], p[1]))
                )
                touches_frame = any(
                    cx == 0 or cy == 0 or cx == world.width - 1 or cy == world.height - 1
                    for cx, cy in cells
                )
                kind = ComponentKind.OUTER if touches_frame else ComponentKind.HOLE
                comps.append(BlockedComponent(len(comps), kind, cells))
    return comps


# ---------------------------------------------------------------------------
# corner analysis

def _incident(world: GridWorld, px: int, py: int):
    """The four cells around lattice point (px, py); out-of-grid is blocked."""
    cells = (
        Cell(px - 1, py - 1),  # lower-left
        Cell(px, py - 1),      # lower-right
        Cell(px - 1, py),      # upper-left
        Cell(px, py),          # upper-right
    )
    flags = tuple(world.is_free(c) for c in cells)
    return cells, flags


# Diagonal opposite position for each incident slot.
_DIAG = {0: 3, 1: 2, 2: 1, 3: 0}


def analyze(world: GridWorld) -> WorldAnalysis:
    """Corner census: every lattice point with exactly 1 or 3 free incident
    cells is a 90 or 270 degree corner. Each hole invalidates its top-left
    reflex corner (largest py, then smallest px); all other reflex corners
    are valid placement targets, with the agent cell diagonally opposite the
    single blocked incident cell.
    """
    comps = find_holes(world)
    comp_id = np.full((world.height, world.width), FRAME_COMPONENT, dtype=np.int32)
    for comp in comps:
        for cx, cy in comp.cells:
            comp_id[cy, cx] = comp.id

    corners: list[CornerPoint] = []
    for py in range(world.height, -1, -1):
        for px in range(world.width + 1):
            cells, flags = _incident(world, px, py)
            nfree = sum(flags)
            if nfree == 1:
                free_slot = flags.index(True)
                blocked_in_grid = [c for c, f in zip(cells, flags)
                                   if not f and world.in_bounds(c)]
                if blocked_in_grid:
                    bc = blocked_in_grid[0]
                    cid = int(comp_id[bc.y, bc.x])
                else:
                    cid = FRAME_COMPONENT
                corners.append(CornerPoint(px, py, CornerKind.CONVEX90,
                                           cells[free_slot], cid, False))
            elif nfree == 3:
                blocked_slot = flags.index(False)
                bc = cells[blocked_slot]
                cid = int(comp_id[bc.y, bc.x])
                agent = cells[_DIAG[blocked_slot]]
                corners.append(CornerPoint(px, py, CornerKind.REFLEX270,
                                           agent, cid, True))

    # exclude the top-left reflex corner of every hole
    hole_ids = [c.id for c in comps if c.kind is ComponentKind.HOLE]
    excluded: set[tuple[int, int]] = set()
    for hid in hole_ids:
        candidates = [c for c in corners
                      if c.kind is CornerKind.REFLEX270 and c.blocked_component_id == hid]
        top_left = max(candidates, key=lambda c: (c.py, -c.px))
        excluded.add((top_left.px, top_left.py))

    final = []
    for c in corners:
        if c.kind is CornerKind.REFLEX270 and (c.px, c.py) in excluded:
            c = CornerPoint(c.px, c.py, c.kind, c.agent_cell,
                            c.blocked_component_id, False)
        final.append(c)

    n = len(final)
    h = len(hole_ids)
    m_refl = (n + 4 * h - 4) // 2
    m_valid = (n + 2 * h - 4) // 2
    return WorldAnalysis(n, h, m_refl, m_valid, tuple(final), tuple(comps))


# ---------------------------------------------------------------------------
# movement graph helpers

def square_graph_neighbors(world: GridWorld, cell: Cell) -> list[Cell]:
    """Free 4-neighbours of a free cell, in N, E, S, W order."""
    out = []
    for dx, dy in NEIGHBOUR_STEPS:
        c = Cell(cell[0] + dx, cell[1] + dy)
        if world.is_free(c):
            out.append(c)
    return out


def bfs_distance_field(world: GridWorld, source: Cell,
                       mask: np.ndarray | None = None) -> np.ndarray:
    """Shortest 4-connected path lengths from source; -1 marks unreachable.

    mask restricts the traversable domain (uint8/bool [h, w]); by default all
    free cells are traversable. The source must be traversable.
    """
    domain = world.free if mask is None else _as_domain(world, mask)
    dist = np.full((world.height, world.width), -1, dtype=np.int32)
    qx = np.empty(world.n_bits, dtype=np.int32)
    qy = np.empty(world.n_bits, dtype=np.int32)
    K.bfs_fill(domain, int(source[0]), int(source[1]), dist, qx, qy)
    return dist


def _as_domain(world: GridWorld, mask: np.ndarray) -> np.ndarray:
    domain = np.ascontiguousarray((mask != 0) & (world.free == FREE), dtype=np.uint8)
    return domain


def bfs_distance_field_banned(world: GridWorld, source: Cell,
                              mask: np.ndarray | None,
                              banned: np.ndarray) -> np.ndarray:
    """bfs_distance_field minus removed edges.

    banned is a uint8 [h, w] grid of direction bitmasks; bit k removes the
    edge leaving a cell via NEIGHBOUR_STEPS[k]. Remove undirected edges by
    setting the bit on both endpoints.
    """
    domain = world.free if mask is None else _as_domain(world, mask)
    dist = np.full((world.height, world.width), -1, dtype=np.int32)
    qx = np.empty(world.n_bits, dtype=np.int32)
    qy = np.empty(world.n_bits, dtype=np.int32)
    K.bfs_fill_banned(domain, int(source[0]), int(source[1]), banned,
                      dist, qx, qy)
    return dist


def border(world: GridWorld, known: np.ndarray) -> list[Cell]:
    """Known free cells with at least one unknown free 4-neighbour.

    Returned in (y descending, x ascending) order.
    """
    kn = (known != 0) & (world.free == FREE)
    unknown_free = (~kn) & (world.free == FREE)
    hits = np.zeros_like(kn)
    hits[1:, :] |= unknown_free[:-1, :]
    hits[:-1, :] |= unknown_free[1:, :]
    hits[:, 1:] |= unknown_free[:, :-1]
    hits[:, :-1] |= unknown_free[:, 1:]
    bmask = kn & hits
    ys, xs = np.nonzero(bmask)
    order = sorted(zip(ys.tolist(), xs.tolist()), key=lambda p: (-p[0], p[1]))
    return [Cell(x, y) for y, x in order]


# ---------------------------------------------------------------------------
# world file format
#
# line 1: "width height dx dy"; then height lines of width chars each,
# '.' free and '#' blocked, top row first. Round-trips bit-exactly.

def dumps(world: GridWorld) -> str:
    lines = [f"{world.width} {world.height} {world.deployment.x} {world.deployment.y}"]
    for y in range(world.height - 1, -1, -1):
        lines.append("".join("." if world.free[y, x] == FREE else "#"
                             for x in range(world.width)))
    return "\n".join(lines) + "\n"


def loads(text: str) -> GridWorld:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise WorldFormatError("empty world file")
    head = lines[0].split()
    if len(head) != 4:
        raise WorldFormatError("header must be 'width height dx dy'")
    try:
        w, h, dx, dy = (int(t) for t in head)
    except ValueError as e:
        raise WorldFormatError(f"bad header: {e}") from None
    if w < 1 or h < 1:
        raise WorldFormatError("width and height must be positive")
    if len(lines) - 1 != h:
        raise WorldFormatError(f"expected {h} rows, found {len(lines) - 1}")
    if not (0 <= dx < w and 0 <= dy < h):
        raise WorldFormatError("deployment point outside the grid")
    free = np.zeros((h, w), dtype=np.uint8)
    for i, row in enumerate(lines[1:]):
        if len(row) != w:
            raise WorldFormatError(f"row {i} has length {len(row)}, expected {w}")
        y = h - 1 - i
        for x, ch in enumerate(row):
            if ch == ".":
                free[y, x] = FREE
            elif ch == "#":
                free[y, x] = BLOCKED
            else:
                raise WorldFormatError(f"bad character {ch!r} in row {i}")
    return GridWorld(w, h, free, Cell(dx, dy))


def load(path) -> GridWorld:
    with open(path, "r", encoding="ascii") as f:
        return loads(f.read())


def save(world: GridWorld, path) -> None:
    with open(path, "w", encoding="ascii", newline="") as f:
        f.write(dumps(world))


def from_rows(rows: list[str], deployment: tuple[int, int]) -> GridWorld:
    """Build a world from text rows given top row first ('.'/'#')."""
    h = len(rows)
    w = len(rows[0])
    text = f"{w} {h} {deployment[0]} {deployment[1]}\n" + "\n".join(rows) + "\n"
    return loads(text)
