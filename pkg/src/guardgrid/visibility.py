"""Discrete line-of-sight over grid worlds.

A cell sees another when the open segment between suitable target points
crosses no blocked cell interior. The working rule tests five targets per
cell (centre plus the four corners inset infinitesimally toward the centre)
in both directions, which keeps the relation symmetric and reflexive;
``sees_dense`` is the 65-sample reference rule used to bound the
approximation error. Per-source fields of view are memoized as packed
uint64 bitmaps keyed by source cell.
"""

from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _kernels as K
from .world import Cell, GridWorld, WorldAnalysis, CornerPoint


def _scaled_half(value: float, name: str) -> int:
    doubled = value * 2.0
    scaled = round(doubled)
    if abs(doubled - scaled) > 1e-9:
        raise ValueError(f"{name} coordinate {value} is not a multiple of 1/2")
    return int(scaled)


def segment_clear(world: GridWorld, p: tuple[float, float],
                  q: tuple[float, float]) -> bool:
    """True iff the open segment pq crosses no blocked cell interior.

    Boundary contact with blocked cells does not block. Inputs must lie on
    the half-unit lattice; the empty segment (p == q) is clear.
    """
    # the kernel centres cell (x, y) on integer coordinates, so world
    # points shift by one half before scaling
    pxa = _scaled_half(p[0], "p.x") - 1
    pya = _scaled_half(p[1], "p.y") - 1
    qxa = _scaled_half(q[0], "q.x") - 1
    qya = _scaled_half(q[1], "q.y") - 1
    return bool(K.segment_clear_k(world.free, 2, pxa, 0, pya, 0, qxa, 0, qya, 0))


def _require_free(world: GridWorld, cell: Cell, name: str) -> None:
    if not world.is_free(cell):
        raise ValueError(f"{name} cell {tuple(cell)} is not a free cell")


def sees(world: GridWorld, a: Cell, b: Cell) -> bool:
    """Symmetric 5-target visibility between two free cells."""
    _require_free(world, a, "a")
    _require_free(world, b, "b")
    return bool(K.cell_sees(world.free, int(a[0]), int(a[1]), int(b[0]), int(b[1])))


def sees_dense(world: GridWorld, a: Cell, b: Cell) -> bool:
    """65-sample reference visibility; never sees less than ``sees``."""
    _require_free(world, a, "a")
    _require_free(world, b, "b")
    return bool(K.cell_sees_dense(world.free, int(a[0]), int(a[1]), int(b[0]), int(b[1])))


class FovCache:
    """Memoized per-source FOV bitmaps for one world.

    Thread-safe; an optional size bound evicts the oldest entry. Bit
    index is y * width + x.
    """

    def __init__(self, world: GridWorld, maxsize: int | None = None):
        self.world = world
        self.maxsize = maxsize
        self._bits: OrderedDict[tuple[int, int], np.ndarray] = OrderedDict()
        self._lock = threading.Lock()
        self.misses = 0

    def get_bits(self, cell: Cell) -> np.ndarray:
        key = (int(cell[0]), int(cell[1]))
        # dict reads are GIL-atomic, so the hit path skips the lock
        cached = self._bits.get(key)
        if cached is not None:
            return cached
        words = np.zeros(self.world.n_words, dtype=np.uint64)
        K.fov_bits_k(self.world.free, key[0], key[1], words)
        words.setflags(write=False)
        with self._lock:
            self.misses += 1
            self._bits[key] = words
            if self.maxsize is not None and len(self._bits) > self.maxsize:
                self._bits.popitem(last=False)
        return words


def popcount(words: np.ndarray) -> int:
    return int(np.bitwise_count(words).sum())


def bits_to_cells(world: GridWorld, words: np.ndarray) -> set[Cell]:
    out: set[Cell] = set()
    w = world.width
    for wd in range(words.shape[0]):
        m = int(words[wd])
        base = wd << 6
        while m:
            low = m & -m
            idx = base + low.bit_length() - 1
            out.add(Cell(idx % w, idx // w))
            m ^= low
    return out


def fov_bits(world: GridWorld, sources: Iterable[Cell],
             cache: FovCache | None = None) -> np.ndarray:
    cache = cache or FovCache(world)
    out = np.zeros(world.n_words, dtype=np.uint64)
    for s in sources:
        out |= cache.get_bits(s)
    return out


def fov(world: GridWorld, sources: Iterable[Cell],
        cache: FovCache | None = None) -> set[Cell]:
    """Union of per-source visible-cell sets; empty sources see nothing."""
    return bits_to_cells(world, fov_bits(world, sources, cache))


def visible_valid_corners(world: GridWorld, analysis: WorldAnalysis,
                          sources: Iterable[Cell],
                          cache: FovCache | None = None) -> list[CornerPoint]:
    """Valid corners whose agent cell lies in the sources' field of view."""
    words = fov_bits(world, sources, cache)
    out = []
    for c in analysis.valid_corners:
        if K.test_bit(words, world.cell_index(c.agent_cell)):
            out.append(c)
    return out


@dataclass(frozen=True)
class VisibilityGraph:
    cells: tuple[Cell, ...]
    adjacency: np.ndarray  # bool [m, m], symmetric, no self loops

    @property
    def edge_count(self) -> int:
        return int(self.adjacency.sum()) // 2


def build_visibility_graph(world: GridWorld,
                           members: Sequence[Cell]) -> VisibilityGraph:
    """Pairwise-sees graph over member cells.

    Duplicate cells are permitted (an agent standing on the deployment
    point); coincident cells are trivially adjacent.
    """
    m = len(members)
    adj = np.zeros((m, m), dtype=bool)
    for i in range(m):
        for j in range(i + 1, m):
            if K.cell_sees(world.free, int(members[i][0]), int(members[i][1]),
                           int(members[j][0]), int(members[j][1])):
                adj[i, j] = adj[j, i] = True
    return VisibilityGraph(tuple(Cell(*c) for c in members), adj)


def is_connected(graph: VisibilityGraph) -> bool:
    m = len(graph.cells)
    if m <= 1:
        return True
    seen = np.zeros(m, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        u = stack.pop()
        for v in np.nonzero(graph.adjacency[u])[0]:
            if not seen[v]:
                seen[v] = True
                stack.append(int(v))
    return bool(seen.all())
