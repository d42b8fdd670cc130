"""Hot numeric kernels: turn-aware distance fields and cell flood fill.

Two interchangeable backends produce bit-identical arrays:

* ``numba`` -- ``@njit``-compiled breadth-first search (default when numba
  imports),
* ``numpy`` -- vectorized fixed-point relaxation, pure numpy.

Selection happens once at import time from the ``LCSNAV_BACKEND`` environment
variable (``auto``, ``numba`` or ``numpy``). ``benchmarks/bench_kernels.py``
compares the two.
"""
from __future__ import annotations

import os

import numpy as np

# Any distance >= UNREACHABLE means "no path". Small enough that +1 never
# overflows int32 inside the kernels.
UNREACHABLE = 2**30

# Direction indices 0..3 = east, south, west, north; x grows rightward,
# y grows downward. Turning right is index+1 mod 4, turning left index+3.
DX = (1, 0, -1, 0)
DY = (0, 1, 0, -1)


def _distance_field_impl(trav, goal_x, goal_y):
    # Backward BFS over (direction, y, x) states. dist[d, y, x] is the
    # minimal number of commands (forward / turn-left / turn-right, unit
    # cost each) from state ((x, y), d) to any state positioned at the goal
    # cell. The goal cell is always enterable even if `trav` marks it
    # blocked: admitted domains guarantee a free goal, so planning may
    # assume it.
    h, w = trav.shape
    cells = h * w
    dist = np.full((4, h, w), UNREACHABLE, dtype=np.int32)
    queue = np.empty(4 * cells, dtype=np.int64)
    tail = 0
    for d in range(4):
        dist[d, goal_y, goal_x] = 0
        queue[tail] = d * cells + goal_y * w + goal_x
        tail += 1
    head = 0
    while head < tail:
        sid = queue[head]
        head += 1
        d = sid // cells
        rem = sid - d * cells
        y = rem // w
        x = rem - y * w
        nd = dist[d, y, x] + 1
        # Turn predecessors share the cell: a left turn from direction d+1
        # lands in d, a right turn from d-1 lands in d.
        pd = (d + 1) % 4
        if dist[pd, y, x] > nd:
            dist[pd, y, x] = nd
            queue[tail] = pd * cells + y * w + x
            tail += 1
        pd = (d + 3) % 4
        if dist[pd, y, x] > nd:
            dist[pd, y, x] = nd
            queue[tail] = pd * cells + y * w + x
            tail += 1
        # Forward predecessor: stood one cell behind along d and moved into
        # (x, y); requires (x, y) enterable and the predecessor standable.
        if trav[y, x] or (x == goal_x and y == goal_y):
            if d == 0:
                px, py = x - 1, y
            elif d == 1:
                px, py = x, y - 1
            elif d == 2:
                px, py = x + 1, y
            else:
                px, py = x, y + 1
            if 0 <= px < w and 0 <= py < h and trav[py, px]:
                if dist[d, py, px] > nd:
                    dist[d, py, px] = nd
                    queue[tail] = d * cells + py * w + px
                    tail += 1
    return dist


def _reachable_impl(open_mask, seed_x, seed_y):
    # Plain 4-connected flood fill over open cells, as uint8 {0, 1}.
    h, w = open_mask.shape
    out = np.zeros((h, w), dtype=np.uint8)
    if not open_mask[seed_y, seed_x]:
        return out
    queue = np.empty(h * w, dtype=np.int64)
    out[seed_y, seed_x] = 1
    queue[0] = seed_y * w + seed_x
    head = 0
    tail = 1
    while head < tail:
        cid = queue[head]
        head += 1
        y = cid // w
        x = cid - y * w
        for k in range(4):
            nx = x + DX[k]
            ny = y + DY[k]
            if 0 <= nx < w and 0 <= ny < h:
                if open_mask[ny, nx] and not out[ny, nx]:
                    out[ny, nx] = 1
                    queue[tail] = ny * w + nx
                    tail += 1
    return out


def distance_field_numpy(trav, goal_x, goal_y):
    """Pure-numpy counterpart of the BFS kernel (fixed-point relaxation)."""
    h, w = trav.shape
    standable = trav.astype(bool)
    enter = standable.copy()
    enter[goal_y, goal_x] = True
    blocked = ~standable
    dist = np.full((4, h, w), UNREACHABLE, dtype=np.int32)
    dist[:, goal_y, goal_x] = 0
    while True:
        turned = np.minimum(np.roll(dist, 1, axis=0), np.roll(dist, -1, axis=0))
        fwd = np.full_like(dist, UNREACHABLE)
        fwd[0, :, :-1] = np.where(enter[:, 1:], dist[0, :, 1:], UNREACHABLE)
        fwd[1, :-1, :] = np.where(enter[1:, :], dist[1, 1:, :], UNREACHABLE)
        fwd[2, :, 1:] = np.where(enter[:, :-1], dist[2, :, :-1], UNREACHABLE)
        fwd[3, 1:, :] = np.where(enter[:-1, :], dist[3, :-1, :], UNREACHABLE)
        nxt = np.minimum(dist, np.minimum(turned, fwd) + 1)
        nxt[:, blocked] = UNREACHABLE
        nxt[:, goal_y, goal_x] = 0
        if np.array_equal(nxt, dist):
            return dist
        dist = nxt


def reachable_cells_numpy(open_mask, seed_x, seed_y):
    """Pure-numpy flood fill via iterated one-cell dilation."""
    h, w = open_mask.shape
    open_b = open_mask.astype(bool)
    out = np.zeros((h, w), dtype=bool)
    if not open_b[seed_y, seed_x]:
        return out.astype(np.uint8)
    out[seed_y, seed_x] = True
    while True:
        grown = out.copy()
        grown[:, 1:] |= out[:, :-1]
        grown[:, :-1] |= out[:, 1:]
        grown[1:, :] |= out[:-1, :]
        grown[:-1, :] |= out[1:, :]
        grown &= open_b
        if np.array_equal(grown, out):
            return out.astype(np.uint8)
        out = grown


def _pick_backend():
    requested = os.environ.get("LCSNAV_BACKEND", "auto").strip().lower()
    if requested not in ("auto", "numba", "numpy"):
        raise ValueError(
            f"LCSNAV_BACKEND must be 'auto', 'numba' or 'numpy', got {requested!r}"
        )
    if requested == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        if requested == "numba":
            raise ImportError("LCSNAV_BACKEND=numba but numba is not installed")
        return "numpy"
    return "numba"


BACKEND = _pick_backend()


def compile_numba_kernels():
    """Return the njit-wrapped kernels, compiling on first call."""
    from numba import njit

    return (
        njit(cache=True)(_distance_field_impl),
        njit(cache=True)(_reachable_impl),
    )


if BACKEND == "numba":
    distance_field_raw, reachable_cells_raw = compile_numba_kernels()
else:
    distance_field_raw, reachable_cells_raw = distance_field_numpy, reachable_cells_numpy


def distance_field(trav: np.ndarray, goal_x: int, goal_y: int) -> np.ndarray:
    """Distance (in commands) from every (direction, y, x) state to the goal.

    `trav` is a uint8 (H, W) mask of standable cells. Entries >= UNREACHABLE
    mean no path. The goal cell may always be entered regardless of `trav`.
    """
    return distance_field_raw(np.ascontiguousarray(trav, dtype=np.uint8), goal_x, goal_y)


def reachable_cells(open_mask: np.ndarray, seed_x: int, seed_y: int) -> np.ndarray:
    """uint8 (H, W) mask of cells 4-connected to the seed within `open_mask`."""
    return reachable_cells_raw(
        np.ascontiguousarray(open_mask, dtype=np.uint8), seed_x, seed_y
    )
