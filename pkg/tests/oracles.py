"""Independent brute-force oracles used to check the fast implementations.

Everything here is deliberately written against explicit state enumeration
with stdlib containers, sharing no code with the package's kernels.
"""
from collections import deque

import numpy as np

DIRS = ((1, 0), (0, 1), (-1, 0), (0, -1))


def oracle_shortest(passable, start, goal):
    """BFS over explicitly enumerated (x, y, d) states.

    `passable(x, y)` says whether a cell can be stood on / entered; the goal
    cell is always enterable. Returns the minimal command count from
    start=(x, y, d) to any state at the goal cell, or None.
    """
    w = passable.shape[1] if hasattr(passable, "shape") else None
    if w is not None:
        grid = passable
        h, w = grid.shape

        def ok(x, y):
            return 0 <= x < w and 0 <= y < h and bool(grid[y, x])

    else:
        ok = passable
        raise TypeError("pass a boolean grid")

    gx, gy = goal
    sx, sy, sd = start
    if (sx, sy) == (gx, gy):
        return 0
    dist = {(sx, sy, sd): 0}
    queue = deque([(sx, sy, sd)])
    while queue:
        x, y, d = queue.popleft()
        n = dist[(x, y, d)]
        succs = [(x, y, (d + 1) % 4), (x, y, (d + 3) % 4)]
        dx, dy = DIRS[d]
        tx, ty = x + dx, y + dy
        if ok(tx, ty) or (tx, ty) == (gx, gy):
            succs.append((tx, ty, d))
        for s in succs:
            if s not in dist:
                dist[s] = n + 1
                if (s[0], s[1]) == (gx, gy):
                    return n + 1
                queue.append(s)
    return None


def oracle_visible_count(width, height, x0, y0, radius):
    """Brute-force count of in-bounds cells inside the vision disc."""
    count = 0
    for y in range(height):
        for x in range(width):
            if (x0 - x) ** 2 + (y0 - y) ** 2 <= radius * radius:
                count += 1
    return count


def random_solvable_grid(rng, max_side=8, wall_prob=0.35):
    """Random free/occupied grid with reachable start and goal cells.

    Returns (passable bool array, start (x, y, d), goal (x, y)).
    """
    while True:
        h = int(rng.integers(2, max_side + 1))
        w = int(rng.integers(2, max_side + 1))
        grid = rng.random((h, w)) > wall_prob
        free = np.argwhere(grid)
        if len(free) < 2:
            continue
        i, j = rng.choice(len(free), size=2, replace=False)
        (sy, sx), (gy, gx) = free[i], free[j]
        d = int(rng.integers(4))
        if oracle_shortest(grid, (sx, sy, d), (gx, gy)) is None:
            continue
        return grid, (int(sx), int(sy), d), (int(gx), int(gy))
