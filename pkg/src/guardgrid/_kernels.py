"""Hot numeric kernels, compiled with numba unless GG_NUMBA=0.

Every function here is written once as plain Python over numpy arrays and
wrapped with ``numba.njit(cache=True)`` when the accelerated backend is
active. Both backends therefore execute identical integer arithmetic and
produce bit-identical results; the env flag only trades speed.

Geometry is exact. A point coordinate is a linear form ``a + b*eps`` over
integers, where ``eps`` is a positive infinitesimal (the corner-target inset).
Cell centres sit at ``scale * x`` and cell boundaries at odd multiples of
``scale // 2``, so every comparison reduces to the lexicographic sign of a
quadratic polynomial in ``eps`` with int64 coefficients.
"""

from __future__ import annotations

import os

import numpy as np

NUMBA_ENABLED = False


def _jit(func):
    return func


if os.environ.get("GG_NUMBA", "1") != "0":
    try:
        from numba import njit

        _jit = njit(cache=True)
        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        pass


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "interpreted"


# ---------------------------------------------------------------------------
# exact segment vs open box


@_jit
def _lin_pos(a, b):
    # sign of a + b*eps for infinitesimal eps > 0
    if a != 0:
        return a > 0
    return b > 0


@_jit
def _frac_lt(n1a, n1b, d1a, d1b, n2a, n2b, d2a, d2b):
    # n1/d1 < n2/d2 with both denominators symbolically positive
    l0 = n1a * d2a
    l1 = n1a * d2b + n1b * d2a
    l2 = n1b * d2b
    r0 = n2a * d1a
    r1 = n2a * d1b + n2b * d1a
    r2 = n2b * d1b
    if l0 != r0:
        return l0 < r0
    if l1 != r1:
        return l1 < r1
    return l2 < r2


@_jit
def _open_seg_hits_box(pxa, pxe, pya, pye, qxa, qxe, qya, qye,
                       lox, hix, loy, hiy):
    """True iff the open segment PQ meets the open axis box.

    Endpoint coordinates are linear forms (a, b) meaning a + b*eps; box
    bounds are plain integers. Clips the parameter interval to the open
    slabs per axis; the segment hits iff every lower bound stays strictly
    below every upper bound (all fractions compared symbolically).
    """
    dxa = qxa - pxa
    dxe = qxe - pxe
    dya = qya - pya
    dye = qye - pye
    if dxa == 0 and dxe == 0 and dya == 0 and dye == 0:
        return False

    has_x = True
    lxn_a = np.int64(0); lxn_b = np.int64(0)
    lxd_a = np.int64(1); lxd_b = np.int64(0)
    uxn_a = np.int64(1); uxn_b = np.int64(0)
    uxd_a = np.int64(1); uxd_b = np.int64(0)
    if dxa == 0 and dxe == 0:
        if not (_lin_pos(pxa - lox, pxe) and _lin_pos(hix - pxa, -pxe)):
            return False
        has_x = False
    elif _lin_pos(dxa, dxe):
        lxn_a = lox - pxa; lxn_b = -pxe
        lxd_a = dxa; lxd_b = dxe
        uxn_a = hix - pxa; uxn_b = -pxe
        uxd_a = dxa; uxd_b = dxe
    else:
        lxn_a = pxa - hix; lxn_b = pxe
        lxd_a = -dxa; lxd_b = -dxe
        uxn_a = pxa - lox; uxn_b = pxe
        uxd_a = -dxa; uxd_b = -dxe

    has_y = True
    lyn_a = np.int64(0); lyn_b = np.int64(0)
    lyd_a = np.int64(1); lyd_b = np.int64(0)
    uyn_a = np.int64(1); uyn_b = np.int64(0)
    uyd_a = np.int64(1); uyd_b = np.int64(0)
    if dya == 0 and dye == 0:
        if not (_lin_pos(pya - loy, pye) and _lin_pos(hiy - pya, -pye)):
            return False
        has_y = False
    elif _lin_pos(dya, dye):
        lyn_a = loy - pya; lyn_b = -pye
        lyd_a = dya; lyd_b = dye
        uyn_a = hiy - pya; uyn_b = -pye
        uyd_a = dya; uyd_b = dye
    else:
        lyn_a = pya - hiy; lyn_b = pye
        lyd_a = -dya; lyd_b = -dye
        uyn_a = pya - loy; uyn_b = pye
        uyd_a = -dya; uyd_b = -dye

    # lower bounds {0, Lx, Ly} must each stay below uppers {1, Ux, Uy}
    if has_x:
        if not _lin_pos(uxn_a, uxn_b):                      # 0 < Ux
            return False
        if not _frac_lt(lxn_a, lxn_b, lxd_a, lxd_b, 1, 0, 1, 0):  # Lx < 1
            return False
    if has_y:
        if not _lin_pos(uyn_a, uyn_b):                      # 0 < Uy
            return False
        if not _frac_lt(lyn_a, lyn_b, lyd_a, lyd_b, 1, 0, 1, 0):  # Ly < 1
            return False
    if has_x and has_y:
        if not _frac_lt(lxn_a, lxn_b, lxd_a, lxd_b,
                        uyn_a, uyn_b, uyd_a, uyd_b):        # Lx < Uy
            return False
        if not _frac_lt(lyn_a, lyn_b, lyd_a, lyd_b,
                        uxn_a, uxn_b, uxd_a, uxd_b):        # Ly < Ux
            return False
    return True


@_jit
def segment_clear_k(free, scale, pxa, pxe, pya, pye, qxa, qxe, qya, qye):
    """True iff the open segment crosses the open interior of no blocked cell.

    Candidate cells come from a float column walk with 0.51 slack (a strict
    superset of every cell the segment can touch); the exact integer predicate
    decides each blocked candidate, so the result does not depend on float
    rounding. Cells outside the grid never block: both endpoints lie inside
    the grid's closed bounding box, which the segment cannot leave.
    """
    if pxa == qxa and pya == qya and pxe == qxe and pye == qye:
        return True
    h, w = free.shape
    half = scale // 2
    x0 = pxa / scale
    y0 = pya / scale
    x1 = qxa / scale
    y1 = qya / scale
    dx = x1 - x0
    dy = y1 - y0
    cxa = int(np.floor(min(x0, x1) - 0.51))
    cxb = int(np.ceil(max(x0, x1) + 0.51))
    step = 1 if x1 >= x0 else -1
    cx = cxa if step == 1 else cxb
    last = cxb if step == 1 else cxa
    while True:
        if 0 <= cx < w:
            empty = False
            if dx != 0.0:
                ta = (cx - 0.51 - x0) / dx
                tb = (cx + 0.51 - x0) / dx
                if ta > tb:
                    tmp = ta; ta = tb; tb = tmp
                if ta < 0.0:
                    ta = 0.0
                if tb > 1.0:
                    tb = 1.0
                if ta <= tb:
                    ya = y0 + ta * dy
                    yb = y0 + tb * dy
                    if ya > yb:
                        tmp = ya; ya = yb; yb = tmp
                else:
                    empty = True
                    ya = 0.0; yb = 0.0
            else:
                ya = min(y0, y1)
                yb = max(y0, y1)
            if not empty:
                cy0 = int(np.floor(ya - 0.51))
                cy1 = int(np.ceil(yb + 0.51))
                if cy0 < 0:
                    cy0 = 0
                if cy1 > h - 1:
                    cy1 = h - 1
                for cy in range(cy0, cy1 + 1):
                    if free[cy, cx] == 0:
                        if _open_seg_hits_box(
                                pxa, pxe, pya, pye, qxa, qxe, qya, qye,
                                scale * cx - half, scale * cx + half,
                                scale * cy - half, scale * cy + half):
                            return False
        if cx == last:
            break
        cx += step
    return True


# ---------------------------------------------------------------------------
# cell-to-cell visibility


@_jit
def solid_fill(free, solid):
    """Mark 8x8 blocks consisting entirely of in-grid blocked cells.

    Blocks clipped by the grid edge are never marked; segments between
    free-cell targets stay inside the grid hull anyway.
    """
    h, w = free.shape
    bh, bw = solid.shape
    for bi in range(bh):
        y0 = bi << 3
        for bj in range(bw):
            x0 = bj << 3
            if y0 + 8 > h or x0 + 8 > w:
                solid[bi, bj] = 0
                continue
            s = 1
            for y in range(y0, y0 + 8):
                for x in range(x0, x0 + 8):
                    if free[y, x] == 1:
                        s = 0
                        break
                if s == 0:
                    break
            solid[bi, bj] = s


@_jit
def _seg_hits_box(px, py, qx, qy, xl, xr, yb, yt):
    """Closed segment vs closed axis box, exact integer SAT."""
    if (px if px > qx else qx) < xl or (px if px < qx else qx) > xr:
        return False
    if (py if py > qy else qy) < yb or (py if py < qy else qy) > yt:
        return False
    dx = qx - px
    dy = qy - py
    c1 = dx * (yb - py) - dy * (xl - px)
    c2 = dx * (yb - py) - dy * (xr - px)
    c3 = dx * (yt - py) - dy * (xl - px)
    c4 = dx * (yt - py) - dy * (xr - px)
    if c1 > 0 and c2 > 0 and c3 > 0 and c4 > 0:
        return False
    if c1 < 0 and c2 < 0 and c3 < 0 and c4 < 0:
        return False
    return True


@_jit
def coarse_blocked(solid, ax, ay, bx, by):
    """True when the centre segment pierces the 1-cell-shrunk core of a
    fully blocked 8x8 block, which provably blocks all candidate segments.

    Every candidate segment stays within the centre segment widened by
    half a cell, so it enters the open block square wherever the centre
    segment reaches depth one; no candidate can run along a grid line
    there because its endpoint ordinates are never integers.
    """
    px = 2 * ax + 1
    py = 2 * ay + 1
    qx = 2 * bx + 1
    qy = 2 * by + 1
    dx = bx - ax
    dy = by - ay
    adx = dx if dx >= 0 else -dx
    ady = dy if dy >= 0 else -dy
    bh, bw = solid.shape
    fpx = ax + 0.5
    fpy = ay + 0.5
    if adx >= ady:
        ck0 = (ax if ax < bx else bx) >> 3
        ck1 = (ax if ax > bx else bx) >> 3
        fdx = float(bx - ax)
        for ck in range(ck0, ck1 + 1):
            t0 = (8.0 * ck - fpx) / fdx
            t1 = (8.0 * ck + 8.0 - fpx) / fdx
            if t0 > t1:
                tmp = t0; t0 = t1; t1 = tmp
            if t0 < 0.0:
                t0 = 0.0
            if t1 > 1.0:
                t1 = 1.0
            if t0 > t1:
                continue
            ya = fpy + t0 * dy
            yb = fpy + t1 * dy
            if ya > yb:
                tmp = ya; ya = yb; yb = tmp
            cr0 = int(np.floor(ya / 8.0)) - 1
            cr1 = int(np.floor(yb / 8.0)) + 1
            if cr0 < 0:
                cr0 = 0
            if cr1 > bh - 1:
                cr1 = bh - 1
            for cr in range(cr0, cr1 + 1):
                if solid[cr, ck] == 1:
                    if _seg_hits_box(px, py, qx, qy,
                                     16 * ck + 2, 16 * ck + 14,
                                     16 * cr + 2, 16 * cr + 14):
                        return True
        return False
    cr0 = (ay if ay < by else by) >> 3
    cr1 = (ay if ay > by else by) >> 3
    fdy = float(by - ay)
    for cr in range(cr0, cr1 + 1):
        t0 = (8.0 * cr - fpy) / fdy
        t1 = (8.0 * cr + 8.0 - fpy) / fdy
        if t0 > t1:
            tmp = t0; t0 = t1; t1 = tmp
        if t0 < 0.0:
            t0 = 0.0
        if t1 > 1.0:
            t1 = 1.0
        if t0 > t1:
            continue
        xa = fpx + t0 * dx
        xb = fpx + t1 * dx
        if xa > xb:
            tmp = xa; xa = xb; xb = tmp
        ck0 = int(np.floor(xa / 8.0)) - 1
        ck1 = int(np.floor(xb / 8.0)) + 1
        if ck0 < 0:
            ck0 = 0
        if ck1 > bw - 1:
            ck1 = bw - 1
        for ck in range(ck0, ck1 + 1):
            if solid[cr, ck] == 1:
                if _seg_hits_box(px, py, qx, qy,
                                 16 * ck + 2, 16 * ck + 14,
                                 16 * cr + 2, 16 * cr + 14):
                    return True
    return False


@_jit
def pair_obstructed(free, ax, ay, bx, by):
    """Conservative obstruction test for the 5-target rule.

    Every candidate segment between the two cells lies inside the tube
    "centre segment, widened by half a cell" (all endpoint offsets have
    infinity-norm < 1/2). Walking the dominant axis, if some cross band of
    the tube, padded by one extra threading-margin cell on each side, is
    entirely blocked, then no candidate segment can avoid a blocked cell
    interior: axis-parallel edge runs are impossible (centre and inset
    corner coordinates never share a half-integer ordinate) and a pass
    through a lattice corner point enters the interiors of two opposite
    quadrant cells, which both lie inside the padded band. Cells outside
    the grid count as blocked; segments cannot leave the closed hull of
    their endpoint cells. True means provably blocked; False means
    undecided.
    """
    h, w = free.shape
    dx = bx - ax
    dy = by - ay
    adx = dx if dx >= 0 else -dx
    ady = dy if dy >= 0 else -dy
    if adx >= ady:
        if adx < 2:
            return False
        stp = 1 if dx > 0 else -1
        fdx = float(dx)
        for k in range(1, adx):
            cx = ax + k * stp
            t0 = (cx - 1.0 - ax) / fdx
            t1 = (cx + 1.0 - ax) / fdx
            if t0 > t1:
                tmp = t0; t0 = t1; t1 = tmp
            if t0 < 0.0:
                t0 = 0.0
            if t1 > 1.0:
                t1 = 1.0
            ya = ay + t0 * dy
            yb = ay + t1 * dy
            if ya > yb:
                tmp = ya; ya = yb; yb = tmp
            ry0 = int(np.floor(ya - 0.5)) - 1
            ry1 = int(np.ceil(yb + 0.5)) + 1
            full = True
            for ry in range(ry0, ry1 + 1):
                if 0 <= ry < h and free[ry, cx] == 1:
                    full = False
                    break
            if full:
                return True
        return False
    if ady < 2:
        return False
    stp = 1 if dy > 0 else -1
    fdy = float(dy)
    for k in range(1, ady):
        cy = ay + k * stp
        t0 = (cy - 1.0 - ay) / fdy
        t1 = (cy + 1.0 - ay) / fdy
        if t0 > t1:
            tmp = t0; t0 = t1; t1 = tmp
        if t0 < 0.0:
            t0 = 0.0
        if t1 > 1.0:
            t1 = 1.0
        xa = ax + t0 * dx
        xb = ax + t1 * dx
        if xa > xb:
            tmp = xa; xa = xb; xb = tmp
        rx0 = int(np.floor(xa - 0.5)) - 1
        rx1 = int(np.ceil(xb + 0.5)) + 1
        full = True
        for rx in range(rx0, rx1 + 1):
            if 0 <= rx < w and free[cy, rx] == 1:
                full = False
                break
        if full:
            return True
    return False


@_jit
def _sees_corners(free, pax, pay, pbx, pby):
    for i in range(4):
        sx = -1 + 2 * (i & 1)
        sy = -1 + 2 * (i >> 1)
        if segment_clear_k(free, 2, pax, 0, pay, 0,
                           pbx + sx, -2 * sx, pby + sy, -2 * sy):
            return True
    for i in range(4):
        sx = -1 + 2 * (i & 1)
        sy = -1 + 2 * (i >> 1)
        if segment_clear_k(free, 2, pbx, 0, pby, 0,
                           pax + sx, -2 * sx, pay + sy, -2 * sy):
            return True
    return False


@_jit
def cell_sees(free, ax, ay, bx, by):
    """5-target visibility rule, symmetrised.

    Clear centre-to-centre segment, or centre of either cell to one of the
    other cell's four corners inset infinitesimally toward its centre.
    """
    if ax == bx and ay == by:
        return True
    pax = 2 * ax; pay = 2 * ay
    pbx = 2 * bx; pby = 2 * by
    if segment_clear_k(free, 2, pax, 0, pay, 0, pbx, 0, pby, 0):
        return True
    if pair_obstructed(free, ax, ay, bx, by):
        return False
    return _sees_corners(free, pax, pay, pbx, pby)


@_jit
def cell_sees_dense(free, ax, ay, bx, by):
    """Dense 65-target reference rule (8x8 grid spanning the inset square,
    plus the centre). The 5-target rule's targets are a subset, so this can
    only ever see more."""
    if ax == bx and ay == by:
        return True
    pax = 14 * ax; pay = 14 * ay
    pbx = 14 * bx; pby = 14 * by
    if segment_clear_k(free, 14, pax, 0, pay, 0, pbx, 0, pby, 0):
        return True
    for i in range(8):
        ox = 2 * i - 7
        for j in range(8):
            oy = 2 * j - 7
            if segment_clear_k(free, 14, pax, 0, pay, 0,
                               pbx + ox, -2 * ox, pby + oy, -2 * oy):
                return True
    for i in range(8):
        ox = 2 * i - 7
        for j in range(8):
            oy = 2 * j - 7
            if segment_clear_k(free, 14, pbx, 0, pby, 0,
                               pax + ox, -2 * ox, pay + oy, -2 * oy):
                return True
    return False


@_jit
def fov_bits_k(free, sx, sy, out_words):
    """Set the bit y*w+x for every free cell visible from source (sx, sy).

    Same relation as cell_sees over every target; a per-source map of
    fully blocked 8x8 blocks lets most cross-wall pairs fail early.
    """
    h, w = free.shape
    solid = np.zeros(((h + 7) >> 3, (w + 7) >> 3), dtype=np.uint8)
    solid_fill(free, solid)
    pax = 2 * sx
    pay = 2 * sy
    for cy in range(h):
        base = cy * w
        for cx in range(w):
            if free[cy, cx] == 0:
                continue
            if cx == sx and cy == sy:
                hit = True
            elif segment_clear_k(free, 2, pax, 0, pay, 0,
                                 2 * cx, 0, 2 * cy, 0):
                hit = True
            elif coarse_blocked(solid, sx, sy, cx, cy):
                hit = False
            elif pair_obstructed(free, sx, sy, cx, cy):
                hit = False
            else:
                hit = _sees_corners(free, pax, pay, 2 * cx, 2 * cy)
            if hit:
                idx = base + cx
                out_words[idx >> 6] |= np.uint64(1) << np.uint64(idx & 63)


# ---------------------------------------------------------------------------
# breadth-first search


@_jit
def bfs_fill(mask, sx, sy, dist, qx, qy):
    """Fill dist with BFS hop counts from (sx, sy) over mask == 1 cells.

    Only touches entries that are currently < 0; neighbour order N, E, S, W.
    """
    h, w = mask.shape
    if mask[sy, sx] == 0 or dist[sy, sx] >= 0:
        return
    head = 0
    tail = 0
    qx[tail] = sx
    qy[tail] = sy
    tail += 1
    dist[sy, sx] = 0
    while head < tail:
        x = qx[head]
        y = qy[head]
        head += 1
        d = dist[y, x] + 1
        if y + 1 < h and mask[y + 1, x] == 1 and dist[y + 1, x] < 0:
            dist[y + 1, x] = d
            qx[tail] = x; qy[tail] = y + 1; tail += 1
        if x + 1 < w and mask[y, x + 1] == 1 and dist[y, x + 1] < 0:
            dist[y, x + 1] = d
            qx[tail] = x + 1; qy[tail] = y; tail += 1
        if y - 1 >= 0 and mask[y - 1, x] == 1 and dist[y - 1, x] < 0:
            dist[y - 1, x] = d
            qx[tail] = x; qy[tail] = y - 1; tail += 1
        if x - 1 >= 0 and mask[y, x - 1] == 1 and dist[y, x - 1] < 0:
            dist[y, x - 1] = d
            qx[tail] = x - 1; qy[tail] = y; tail += 1


@_jit
def bfs_fill_banned(mask, sx, sy, banned, dist, qx, qy):
    """bfs_fill over mask == 1 cells minus banned edges.

    banned holds per-cell direction bitmasks (bit 0 = N, 1 = E, 2 = S,
    3 = W); a set bit removes the edge leaving the cell in that direction.
    Callers ban undirected edges by setting the bit on both endpoints.
    """
    h, w = mask.shape
    if mask[sy, sx] == 0 or dist[sy, sx] >= 0:
        return
    head = 0
    tail = 0
    qx[tail] = sx
    qy[tail] = sy
    tail += 1
    dist[sy, sx] = 0
    while head < tail:
        x = qx[head]
        y = qy[head]
        head += 1
        d = dist[y, x] + 1
        b = banned[y, x]
        if (b & 1) == 0 and y + 1 < h and mask[y + 1, x] == 1 \
                and dist[y + 1, x] < 0:
            dist[y + 1, x] = d
            qx[tail] = x; qy[tail] = y + 1; tail += 1
        if (b & 2) == 0 and x + 1 < w and mask[y, x + 1] == 1 \
                and dist[y, x + 1] < 0:
            dist[y, x + 1] = d
            qx[tail] = x + 1; qy[tail] = y; tail += 1
        if (b & 4) == 0 and y - 1 >= 0 and mask[y - 1, x] == 1 \
                and dist[y - 1, x] < 0:
            dist[y - 1, x] = d
            qx[tail] = x; qy[tail] = y - 1; tail += 1
        if (b & 8) == 0 and x - 1 >= 0 and mask[y, x - 1] == 1 \
                and dist[y, x - 1] < 0:
            dist[y, x - 1] = d
            qx[tail] = x - 1; qy[tail] = y; tail += 1


# ---------------------------------------------------------------------------
# packed bitmap set operations


@_jit
def or_rows(rows, idxs, out):
    """out = bitwise OR of the selected bitmap rows."""
    nw = out.shape[0]
    for wd in range(nw):
        acc = np.uint64(0)
        for k in range(idxs.shape[0]):
            acc |= rows[idxs[k], wd]
        out[wd] = acc


@_jit
def covers(rows, idxs, need):
    """True iff the OR of the selected rows is a superset of `need`."""
    nw = need.shape[0]
    for wd in range(nw):
        acc = np.uint64(0)
        for k in range(idxs.shape[0]):
            acc |= rows[idxs[k], wd]
        if (need[wd] & ~acc) != np.uint64(0):
            return False
    return True


@_jit
def counts_add(row, counts, delta):
    """counts[bit] += delta for every set bit of the bitmap row."""
    for wd in range(row.shape[0]):
        m = row[wd]
        if m == np.uint64(0):
            continue
        base = wd << 6
        for b in range(64):
            if (m >> np.uint64(b)) & np.uint64(1):
                counts[base + b] += delta


@_jit
def all_multi_covered(row, counts):
    """True iff every set bit of row has counts >= 2 (removal-safe)."""
    for wd in range(row.shape[0]):
        m = row[wd]
        if m == np.uint64(0):
            continue
        base = wd << 6
        for b in range(64):
            if (m >> np.uint64(b)) & np.uint64(1):
                if counts[base + b] < 2:
                    return False
    return True


@_jit
def counts_move(old_row, new_row, counts, known_row):
    """Shift per-cell cover counts for a member moving between two FOVs.

    Removes old_row, adds new_row, and returns the net change in the
    number of known cells left with zero cover (negative when the move
    heals holes). Swapping the row arguments undoes the shift exactly.
    """
    delta = 0
    one = np.uint64(1)
    zero = np.uint64(0)
    for wd in range(old_row.shape[0]):
        gain = new_row[wd] & ~old_row[wd]
        lose = old_row[wd] & ~new_row[wd]
        if gain == zero and lose == zero:
            continue
        base = wd << 6
        kw = known_row[wd]
        for b in range(64):
            bit = one << np.uint64(b)
            if gain & bit != zero:
                idx = base + b
                counts[idx] += 1
                if counts[idx] == 1 and kw & bit != zero:
                    delta -= 1
            elif lose & bit != zero:
                idx = base + b
                counts[idx] -= 1
                if counts[idx] == 0 and kw & bit != zero:
                    delta += 1
    return delta


@_jit
def reach_mask(bitrows, flat_cells, start, seen):
    """Mark the visibility-graph component of node `start`.

    bitrows[i] is the FOV bitmap of member i's cell; members i, j are
    adjacent iff member j's cell bit is set in bitrows[i] (the relation is
    already symmetric). seen is a uint8 scratch array, zeroed by the caller.
    """
    m = flat_cells.shape[0]
    stack = np.empty(m, np.int64)
    seen[start] = 1
    stack[0] = start
    top = 1
    while top > 0:
        top -= 1
        u = stack[top]
        for v in range(m):
            if seen[v] == 0:
                idx = flat_cells[v]
                if (bitrows[u, idx >> 6] >> np.uint64(idx & 63)) & np.uint64(1):
                    seen[v] = 1
                    stack[top] = v
                    top += 1


@_jit
def test_bit(words, idx):
    return (words[idx >> 6] >> np.uint64(idx & 63)) & np.uint64(1) != np.uint64(0)


@_jit
def set_bit(words, idx):
    words[idx >> 6] |= np.uint64(1) << np.uint64(idx & 63)


# ---------------------------------------------------------------------------
# potential-field step


@_jit
def apf_decide(free, axs, ays, self_idx, depx, depy,
               k_o, k_a, radius, move_threshold):
    """Pick a move for one potential-field agent.

    Forces: inverse-square repulsion from blocked cells and from every other
    agent (the deployment point repels like an agent) within `radius`.
    The agent takes the free 4-neighbour maximizing the dot product with the
    net force, provided |F| >= move_threshold and the neighbour strictly
    lowers the local potential sum(k/d). Returns the direction index into
    (N, E, S, W), or -1 to stay. Co-located sources add no force direction
    but infinite potential.
    """
    h, w = free.shape
    px = axs[self_idx]
    py = ays[self_idx]
    r2 = radius * radius
    rint = int(radius) + 1

    fx = 0.0
    fy = 0.0
    lo_y = py - rint if py - rint >= 0 else 0
    hi_y = py + rint if py + rint <= h - 1 else h - 1
    lo_x = px - rint if px - rint >= 0 else 0
    hi_x = px + rint if px + rint <= w - 1 else w - 1
    for by in range(lo_y, hi_y + 1):
        for bx in range(lo_x, hi_x + 1):
            if free[by, bx] == 0:
                ddx = float(px - bx)
                ddy = float(py - by)
                d2 = ddx * ddx + ddy * ddy
                if d2 > 0.0 and d2 <= r2:
                    d = np.sqrt(d2)
                    s = k_o / (d2 * d)
                    fx += s * ddx
                    fy += s * ddy
    n = axs.shape[0]
    for i in range(n + 1):
        if i == self_idx:
            continue
        ox = depx if i == n else axs[i]
        oy = depy if i == n else ays[i]
        ddx = float(px - ox)
        ddy = float(py - oy)
        d2 = ddx * ddx + ddy * ddy
        if d2 > 0.0 and d2 <= r2:
            d = np.sqrt(d2)
            s = k_a / (d2 * d)
            fx += s * ddx
            fy += s * ddy

    if fx * fx + fy * fy < move_threshold * move_threshold:
        return -1

    # free neighbour maximizing dot(F, dir); ties resolved in N, E, S, W order
    best = -1
    best_dot = -1.0e300
    for k in range(4):
        if k == 0:
            nx = px; ny = py + 1; dot = fy
        elif k == 1:
            nx = px + 1; ny = py; dot = fx
        elif k == 2:
            nx = px; ny = py - 1; dot = -fy
        else:
            nx = px - 1; ny = py; dot = -fx
        if 0 <= nx < w and 0 <= ny < h and free[ny, nx] == 1:
            if dot > best_dot:
                best_dot = dot
                best = k
    if best < 0:
        return -1

    if best == 0:
        cx = px; cy = py + 1
    elif best == 1:
        cx = px + 1; cy = py
    elif best == 2:
        cx = px; cy = py - 1
    else:
        cx = px - 1; cy = py

    u_here = _apf_potential(free, axs, ays, self_idx, depx, depy,
                            k_o, k_a, radius, px, py)
    u_there = _apf_potential(free, axs, ays, self_idx, depx, depy,
                             k_o, k_a, radius, cx, cy)
    if u_there < u_here:
        return best
    return -1


@_jit
def _apf_potential(free, axs, ays, self_idx, depx, depy,
                   k_o, k_a, radius, px, py):
    h, w = free.shape
    r2 = radius * radius
    rint = int(radius) + 1
    u = 0.0
    lo_y = py - rint if py - rint >= 0 else 0
    hi_y = py + rint if py + rint <= h - 1 else h - 1
    lo_x = px - rint if px - rint >= 0 else 0
    hi_x = px + rint if px + rint <= w - 1 else w - 1
    for by in range(lo_y, hi_y + 1):
        for bx in range(lo_x, hi_x + 1):
            if free[by, bx] == 0:
                ddx = float(px - bx)
                ddy = float(py - by)
                d2 = ddx * ddx + ddy * ddy
                if d2 <= r2:
                    if d2 == 0.0:
                        u += 1.0e30
                    else:
                        u += k_o / np.sqrt(d2)
    n = axs.shape[0]
    for i in range(n + 1):
        if i == self_idx:
            continue
        ox = depx if i == n else axs[i]
        oy = depy if i == n else ays[i]
        ddx = float(px - ox)
        ddy = float(py - oy)
        d2 = ddx * ddx + ddy * ddy
        if d2 <= r2:
            if d2 == 0.0:
                u += 1.0e30
            else:
                u += k_a / np.sqrt(d2)
    return u
