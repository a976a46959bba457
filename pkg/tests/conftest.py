"""Shared helpers: literal world builders and a small random-world source.

Random worlds here are independent of the dungeon generator so property
tests do not inherit its biases; they are repaired to the same validity
rules (no free diagonal pairs, connected free space).
"""

from __future__ import annotations

import numpy as np
import pytest

from guardgrid.world import (Cell, GridWorld, from_rows, validate_world,
                             WorldError)


def world(rows: list[str], dep: tuple[int, int] = (0, 0)) -> GridWorld:
    w = from_rows(rows, dep)
    validate_world(w)
    return w


def open_world(width: int, height: int,
               dep: tuple[int, int] = (0, 0)) -> GridWorld:
    return world(["." * width] * height, dep)


def _repair_diagonals(free: np.ndarray) -> None:
    h, w = free.shape
    changed = True
    while changed:
        changed = False
        for py in range(1, h):
            for px in range(1, w):
                a = free[py - 1, px - 1]
                b = free[py - 1, px]
                c = free[py, px - 1]
                d = free[py, px]
                if (a and d and not b and not c):
                    free[py - 1, px] = 1
                    changed = True
                elif (b and c and not a and not d):
                    free[py - 1, px - 1] = 1
                    changed = True


def random_valid_world(rng: np.random.Generator, width: int, height: int,
                       density: float = 0.3) -> GridWorld | None:
    """A repaired random world, or None when free space ends up split."""
    free = (rng.random((height, width)) >= density).astype(np.uint8)
    if free.sum() == 0:
        return None
    _repair_diagonals(free)
    ys, xs = np.nonzero(free)
    dep = Cell(int(xs[0]), int(ys[0]))
    w = GridWorld(width, height, free, dep)
    try:
        validate_world(w)
    except WorldError:
        return None
    return w


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20250814)
