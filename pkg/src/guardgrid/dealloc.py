"""Greedy removal of redundant settled agents.

Scans settled agents in ascending id order and removes the first whose
removal leaves the collective field of view exactly equal and the
visibility graph over the remainder plus the deployment point connected;
the scan restarts after every removal and stops once a full pass removes
nothing. The result is idempotent: a second pass never removes more.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels as K
from .visibility import FovCache
from .world import Cell, GridWorld


@dataclass(frozen=True)
class DeallocReport:
    removed: tuple[int, ...]   # indices into the input order, in removal order
    kept: tuple[int, ...]
    passes: int


class Deallocator:
    """Incremental per-cell cover counts over member FOV bitmaps.

    The deployment point is a permanent member. Keys are agent ids (any
    ascending-comparable ints); scan order is ascending key.
    """

    def __init__(self, world: GridWorld, cache: FovCache, x_d: Cell):
        self.world = world
        self.cache = cache
        self.x_d = Cell(*x_d)
        self.counts = np.zeros(world.n_bits, dtype=np.int32)
        self._dep_row = cache.get_bits(self.x_d)
        K.counts_add(self._dep_row, self.counts, 1)
        self.cells: dict[int, Cell] = {}

    def add(self, key: int, cell: Cell) -> None:
        cell = Cell(*cell)
        self.cells[key] = cell
        K.counts_add(self.cache.get_bits(cell), self.counts, 1)

    def remove(self, key: int) -> None:
        cell = self.cells.pop(key)
        K.counts_add(self.cache.get_bits(cell), self.counts, -1)

    def _connected_without(self, skip_key: int | None) -> bool:
        members = [self.x_d] + [self.cells[k] for k in sorted(self.cells)
                                if k != skip_key]
        m = len(members)
        if m <= 1:
            return True
        rows = np.empty((m, self.world.n_words), dtype=np.uint64)
        for i, c in enumerate(members):
            rows[i] = self.cache.get_bits(c)
        flat = np.array([self.world.cell_index(c) for c in members],
                        dtype=np.int64)
        seen = np.zeros(m, dtype=np.uint8)
        K.reach_mask(rows, flat, 0, seen)
        return bool(seen.all())

    def sweep(self) -> tuple[list[int], int]:
        """Run greedy passes to the fixed point; returns (removed keys, passes)."""
        removed: list[int] = []
        passes = 0
        while True:
            passes += 1
            victim = None
            for key in sorted(self.cells):
                row = self.cache.get_bits(self.cells[key])
                if not K.all_multi_covered(row, self.counts):
                    continue
                if not self._connected_without(key):
                    continue
                victim = key
                break
            if victim is None:
                return removed, passes
            self.remove(victim)
            removed.append(victim)


def greedy_deallocate(world: GridWorld, terminal: Sequence[Cell], x_d: Cell,
                      cache: FovCache | None = None) -> DeallocReport:
    """One-shot greedy deallocation over a settled configuration."""
    dealloc = Deallocator(world, cache or FovCache(world), x_d)
    for i, cell in enumerate(terminal):
        dealloc.add(i, cell)
    removed, passes = dealloc.sweep()
    kept = tuple(i for i in range(len(terminal)) if i not in set(removed))
    return DeallocReport(tuple(removed), kept, passes)
