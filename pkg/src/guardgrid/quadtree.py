"""Region quadtree size as a complexity measure.

The grid is padded with blocked cells to the next power of two and split
recursively; uniform squares stop, mixed squares split into four. The
node count (every node, inner and leaf) is always 1 modulo 4 and divides
worlds into complexity ranks of one thousand nodes.
"""

from __future__ import annotations

import numpy as np

from .world import GridWorld

RANK_DIVISOR = 1000


def _padded_side(world: GridWorld) -> int:
    p = 1
    while p < max(world.width, world.height):
        p <<= 1
    return p


def node_count(world: GridWorld) -> int:
    p = _padded_side(world)
    grid = np.zeros((p, p), dtype=np.int64)
    grid[:world.height, :world.width] = world.free
    # summed-area table: sums[y, x] = total free in grid[:y, :x]
    sums = np.zeros((p + 1, p + 1), dtype=np.int64)
    np.cumsum(np.cumsum(grid, axis=0), axis=1, out=sums[1:, 1:])

    count = 0
    stack = [(0, 0, p)]
    while stack:
        x0, y0, side = stack.pop()
        count += 1
        total = (int(sums[y0 + side, x0 + side]) - int(sums[y0, x0 + side])
                 - int(sums[y0 + side, x0]) + int(sums[y0, x0]))
        if side == 1 or total == 0 or total == side * side:
            continue
        half = side // 2
        stack.append((x0, y0, half))
        stack.append((x0 + half, y0, half))
        stack.append((x0, y0 + half, half))
        stack.append((x0 + half, y0 + half, half))
    return count


def rank(world: GridWorld) -> int:
    return node_count(world) // RANK_DIVISOR
