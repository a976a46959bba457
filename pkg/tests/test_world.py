"""World validity, corner analysis, BFS, border, and file format."""

import heapq

import numpy as np
import pytest

from guardgrid.world import (BLOCKED, FREE, Cell, CornerKind, ComponentKind,
                             DisconnectedFreeSpace, ForbiddenDiagonal,
                             GridWorld, WorldFormatError, analyze,
                             bfs_distance_field, border, dumps, find_holes,
                             from_rows, loads, square_graph_neighbors,
                             validate_world)

from conftest import open_world, random_valid_world, world


# -- validity ---------------------------------------------------------------

def test_forbidden_diagonal():
    w = GridWorld(2, 2, np.array([[0, 1], [1, 0]], dtype=np.uint8), Cell(1, 0))
    with pytest.raises(ForbiddenDiagonal):
        validate_world(w)


def test_valid_2x2():
    validate_world(open_world(2, 2))


def test_disconnected_corridor():
    w = GridWorld(3, 1, np.array([[1, 0, 1]], dtype=np.uint8), Cell(0, 0))
    with pytest.raises(DisconnectedFreeSpace) as e:
        validate_world(w)
    assert e.value.component_count == 2


def test_blocked_deployment_rejected():
    w = GridWorld(2, 1, np.array([[1, 0]], dtype=np.uint8), Cell(1, 0))
    with pytest.raises(Exception):
        validate_world(w)


# -- holes ------------------------------------------------------------------

def _ring_with_block(size: int, bx: int, by: int, bs: int) -> GridWorld:
    rows = []
    for y in range(size - 1, -1, -1):
        rows.append("".join("#" if bx <= x < bx + bs and by <= y < by + bs
                            else "." for x in range(size)))
    return from_rows(rows, (0, 0))


def test_centered_block_is_hole():
    w = _ring_with_block(7, 2, 2, 3)
    comps = find_holes(w)
    holes = [c for c in comps if c.kind is ComponentKind.HOLE]
    assert len(holes) == 1
    assert len(holes[0].cells) == 9


def test_all_free_no_holes():
    assert find_holes(open_world(5, 5)) == []


def test_edge_block_merges_with_frame():
    w = _ring_with_block(7, 2, 4, 3)      # touches the top edge (y = 6)
    comps = find_holes(w)
    assert all(c.kind is ComponentKind.OUTER for c in comps)


# -- corner analysis ----------------------------------------------------------

def test_open_world_counts():
    a = analyze(open_world(5, 5))
    assert (a.n, a.h, a.m_refl, a.m_valid) == (4, 0, 0, 0)
    assert all(c.kind is CornerKind.CONVEX90 for c in a.corners)


def test_centered_hole_counts():
    a = analyze(_ring_with_block(7, 2, 2, 3))
    assert (a.n, a.h, a.m_refl, a.m_valid) == (8, 1, 4, 3)
    assert sum(1 for c in a.corners if c.is_valid) == 3


def test_hole_excluded_corner_is_top_left():
    a = analyze(_ring_with_block(7, 2, 2, 3))
    skipped = [c for c in a.reflex_corners if not c.is_valid]
    assert len(skipped) == 1
    top = max(a.reflex_corners, key=lambda c: (c.py, -c.px))
    assert skipped[0] == top


def test_l_shape_counts():
    # 6x6 minus its 3x3 top-right quadrant
    rows = ["...###"] * 3 + ["......"] * 3
    a = analyze(from_rows(rows, (0, 0)))
    assert (a.n, a.h, a.m_valid) == (6, 0, 1)
    valid = a.valid_corners
    assert len(valid) == 1
    assert valid[0].kind is CornerKind.REFLEX270


def test_reflex_agent_cell_is_free_diagonal():
    a = analyze(_ring_with_block(7, 2, 2, 3))
    w = _ring_with_block(7, 2, 2, 3)
    for c in a.reflex_corners:
        assert w.is_free(c.agent_cell)
        # agent cell touches the corner point from inside the reflex angle
        assert c.agent_cell.x in (c.px - 1, c.px)
        assert c.agent_cell.y in (c.py - 1, c.py)


def test_corner_properties_random_worlds(rng):
    seen = 0
    for _ in range(300):
        w = random_valid_world(rng, int(rng.integers(3, 13)),
                               int(rng.integers(3, 13)))
        if w is None:
            continue
        seen += 1
        a = analyze(w)
        assert a.n % 2 == 0
        assert (a.n + 4 * a.h - 4) % 2 == 0
        three_free = sum(1 for c in a.corners
                         if c.kind is CornerKind.REFLEX270)
        assert three_free == (a.n + 4 * a.h - 4) // 2 == a.m_refl
        assert sum(1 for c in a.corners if c.is_valid) == a.m_valid
        assert a.m_valid == a.m_refl - a.h
    assert seen >= 150


def test_blocked_connectivity_coincidence(rng):
    # 4-connected and 8-connected blocked components agree on valid worlds
    for _ in range(120):
        w = random_valid_world(rng, int(rng.integers(4, 12)),
                               int(rng.integers(4, 12)), density=0.4)
        if w is None:
            continue
        blocked = (w.free == BLOCKED)
        comp4 = _label(blocked, diag=False)
        comp8 = _label(blocked, diag=True)
        pairs = {(comp4[y, x], comp8[y, x])
                 for y in range(w.height) for x in range(w.width)
                 if blocked[y, x]}
        assert len({a for a, _ in pairs}) == len({b for _, b in pairs}) \
            == len(pairs)


def _label(mask: np.ndarray, diag: bool) -> np.ndarray:
    h, w = mask.shape
    out = np.full((h, w), -1, dtype=int)
    steps = [(0, 1), (1, 0), (0, -1), (-1, 0)]
    if diag:
        steps += [(1, 1), (1, -1), (-1, 1), (-1, -1)]
    nxt = 0
    for y in range(h):
        for x in range(w):
            if not mask[y, x] or out[y, x] >= 0:
                continue
            out[y, x] = nxt
            stack = [(x, y)]
            while stack:
                cx, cy = stack.pop()
                for dx, dy in steps:
                    nx, ny = cx + dx, cy + dy
                    if (0 <= nx < w and 0 <= ny < h and mask[ny, nx]
                            and out[ny, nx] < 0):
                        out[ny, nx] = nxt
                        stack.append((nx, ny))
            nxt += 1
    return out


# -- square graph and BFS -----------------------------------------------------

def test_neighbors_interior_order():
    w = open_world(3, 3)
    assert square_graph_neighbors(w, Cell(1, 1)) == [
        Cell(1, 2), Cell(2, 1), Cell(1, 0), Cell(0, 1)]


def test_neighbors_corner():
    w = open_world(3, 3)
    assert len(square_graph_neighbors(w, Cell(0, 0))) == 2


def test_neighbors_corridor():
    w = world(["###", "...", "###"], dep=(0, 1))
    assert square_graph_neighbors(w, Cell(1, 1)) == [Cell(2, 1), Cell(0, 1)]


def test_bfs_adjacent():
    w = open_world(2, 1)
    f = bfs_distance_field(w, Cell(0, 0), None)
    assert f[0, 1] == 1


def test_bfs_opposite_corners():
    k = 6
    f = bfs_distance_field(open_world(k, k), Cell(0, 0), None)
    assert f[k - 1, k - 1] == 2 * (k - 1)


def _dijkstra(w: GridWorld, src: Cell) -> dict[Cell, int]:
    dist = {src: 0}
    q = [(0, tuple(src))]
    while q:
        d, cur = heapq.heappop(q)
        c = Cell(*cur)
        if d > dist[c]:
            continue
        for dx, dy in ((0, 1), (1, 0), (0, -1), (-1, 0)):
            n = Cell(c.x + dx, c.y + dy)
            if w.is_free(n) and d + 1 < dist.get(n, 1 << 30):
                dist[n] = d + 1
                heapq.heappush(q, (d + 1, tuple(n)))
    return dist


def test_bfs_detour_through_gap():
    rows = ["....",
            "###.",
            "...."]
    w = from_rows(rows, (0, 0))
    f = bfs_distance_field(w, Cell(0, 0), None)
    oracle = _dijkstra(w, Cell(0, 0))
    assert f[2, 0] == oracle[Cell(0, 2)] == 8


def test_bfs_matches_dijkstra_small_worlds(rng):
    for _ in range(40):
        w = random_valid_world(rng, int(rng.integers(3, 13)),
                               int(rng.integers(3, 13)))
        if w is None:
            continue
        for src in w.scan_free_cells()[:3]:
            f = bfs_distance_field(w, src, None)
            oracle = _dijkstra(w, src)
            for c in w.scan_free_cells():
                expect = oracle.get(c, -1)
                assert f[c.y, c.x] == expect


# -- border -------------------------------------------------------------------

def test_border_full_knowledge_empty():
    w = open_world(4, 3)
    assert border(w, np.ones((3, 4), dtype=bool)) == []


def test_border_single_cell():
    w = open_world(4, 3)
    known = np.zeros((3, 4), dtype=bool)
    known[1, 1] = True
    assert border(w, known) == [Cell(1, 1)]


def test_border_half_corridor():
    w = world(["....."], dep=(0, 0))
    known = np.zeros((1, 5), dtype=bool)
    known[0, :3] = True
    assert border(w, known) == [Cell(2, 0)]


def test_border_scan_order():
    w = open_world(3, 3)
    known = np.zeros((3, 3), dtype=bool)
    known[0, :] = True
    known[2, :] = True
    cells = border(w, known)
    assert cells == [Cell(0, 2), Cell(1, 2), Cell(2, 2),
                     Cell(0, 0), Cell(1, 0), Cell(2, 0)]


# -- file format ---------------------------------------------------------------

def test_round_trip_exact_bytes():
    rows = ["..#.",
            "....",
            ".##.",
            "...."]
    w = from_rows(rows, (0, 0))
    text = dumps(w)
    again = dumps(loads(text))
    assert text == again
    assert text.split("\n")[1] == "..#."


def test_loads_rejects_bad_header():
    with pytest.raises(WorldFormatError):
        loads("3 3 0\n...\n...\n...\n")


def test_loads_rejects_bad_char():
    with pytest.raises(WorldFormatError):
        loads("2 1 0 0\n.x\n")


def test_loads_rejects_row_mismatch():
    with pytest.raises(WorldFormatError):
        loads("2 2 0 0\n..\n")


def test_scan_order_top_row_first():
    w = from_rows(["#.", ".."], (0, 0))
    assert w.scan_free_cells() == (Cell(1, 1), Cell(0, 0), Cell(1, 0))
