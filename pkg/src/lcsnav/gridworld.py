"""Static occupancy grids, robot kinematics, radius-limited vision and map I/O.

Conventions used everywhere in the package:

* cells are addressed as (x, y) with x growing rightward and y growing
  downward; arrays are indexed ``[y, x]``;
* cell values: -1 free, +1 occupied; accumulated knowledge additionally
  uses 0 for "unknown";
* directions are indexed 0..3 = east (1,0), south (0,1), west (-1,0),
  north (0,-1); turning right is index+1 mod 4 (clockwise when the grid is
  drawn with y downward), turning left index+3;
* a robot loaded from a map file initially faces south (toward the goal
  side: generated maps start on row 0 and end on row H-1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property

import numpy as np

from ._kernels import UNREACHABLE, distance_field, reachable_cells

FREE = -1
UNKNOWN = 0
OCCUPIED = 1

DIRECTIONS: tuple[tuple[int, int], ...] = ((1, 0), (0, 1), (-1, 0), (0, -1))
DIR_EAST, DIR_SOUTH, DIR_WEST, DIR_NORTH = 0, 1, 2, 3

Cell = tuple[int, int]


class Action(IntEnum):
    """The three robot commands, in their fixed tie-breaking order."""

    FORWARD = 0
    TURN_LEFT = 1
    TURN_RIGHT = 2


ACTIONS = (Action.FORWARD, Action.TURN_LEFT, Action.TURN_RIGHT)


def turn_left(d: int) -> int:
    return (d + 3) % 4


def turn_right(d: int) -> int:
    return (d + 1) % 4


class MapFormatError(ValueError):
    """Malformed map text; carries the offending 1-based line/column."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        at = ""
        if line is not None:
            at = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + at)
        self.line = line
        self.column = column


class UnsolvableMapError(ValueError):
    """No path from start to goal exists."""


class MapGenerationError(RuntimeError):
    """Generator parameters could not produce a solvable map."""


class KnowledgeConflictError(RuntimeError):
    """Accumulated observations contradict each other (corrupted domain)."""


@dataclass(frozen=True)
class RobotState:
    """Robot pose: cell coordinates plus one of four direction indices."""

    x: int
    y: int
    d: int

    @property
    def position(self) -> Cell:
        return (self.x, self.y)

    @property
    def direction(self) -> tuple[int, int]:
        return DIRECTIONS[self.d]


@dataclass(frozen=True)
class VisionConfig:
    """Sensing disc radius, in cells."""

    radius: float = 5.0

    def __post_init__(self):
        if self.radius < 1:
            raise ValueError("vision radius must be >= 1")


@dataclass(frozen=True)
class GridDomain:
    """Immutable occupancy grid with a start pose and a goal cell.

    Construction validates the full set of domain invariants, including
    solvability; every admitted domain has a path from start to goal.
    """

    cells: np.ndarray
    start: RobotState
    goal: Cell

    def __post_init__(self):
        cells = np.ascontiguousarray(self.cells, dtype=np.int8)
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        if cells.ndim != 2:
            raise ValueError("cells must be a 2-D array")
        if not np.isin(cells, (FREE, OCCUPIED)).all():
            raise ValueError("cells must contain only -1 (free) and 1 (occupied)")
        sx, sy = self.start.x, self.start.y
        gx, gy = self.goal
        if not (self.in_bounds(sx, sy) and self.in_bounds(gx, gy)):
            raise ValueError("start/goal out of bounds")
        if cells[sy, sx] != FREE or cells[gy, gx] != FREE:
            raise UnsolvableMapError("start and goal must be free cells")
        if (sx, sy) == (gx, gy):
            raise ValueError("start and goal must differ")
        open_mask = (cells == FREE).astype(np.uint8)
        if not reachable_cells(open_mask, sx, sy)[gy, gx]:
            raise UnsolvableMapError("no path from start to goal")

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    def in_bounds(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def is_free(self, x: int, y: int) -> bool:
        return self.in_bounds(x, y) and self.cells[y, x] == FREE

    @cached_property
    def goal_distance_field(self) -> np.ndarray:
        """True shortest-command distances to the goal, all (d, y, x) states."""
        trav = (self.cells == FREE).astype(np.uint8)
        return distance_field(trav, self.goal[0], self.goal[1])

    @cached_property
    def optimal_length(self) -> int:
        """Command count of the shortest start-to-goal path."""
        n = int(self.goal_distance_field[self.start.d, self.start.y, self.start.x])
        if n >= UNREACHABLE:
            raise UnsolvableMapError("no path from start to goal")
        return n


@dataclass(frozen=True)
class ObservationMap:
    """Three-valued accumulated knowledge: -1 known free, 0 unknown, 1 known occupied."""

    knowledge: np.ndarray

    def __post_init__(self):
        knowledge = np.ascontiguousarray(self.knowledge, dtype=np.int8)
        knowledge.setflags(write=False)
        object.__setattr__(self, "knowledge", knowledge)

    @classmethod
    def unknown(cls, width: int, height: int) -> "ObservationMap":
        return cls(np.zeros((height, width), dtype=np.int8))

    @property
    def width(self) -> int:
        return self.knowledge.shape[1]

    @property
    def height(self) -> int:
        return self.knowledge.shape[0]


@dataclass(frozen=True)
class FullObservation:
    """Everything a policy may look at: pose, accumulated map and goal."""

    robot: RobotState
    map: ObservationMap
    goal: Cell

    def __post_init__(self):
        if self.map.knowledge[self.robot.y, self.robot.x] != FREE:
            raise ValueError("robot must stand on a known-free cell")


@dataclass(frozen=True)
class DomainEnsemble:
    """Support of the domain distribution: domains with positive weights summing to 1."""

    domains: tuple[GridDomain, ...]
    weights: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if not self.domains:
            raise ValueError("ensemble must contain at least one domain")
        weights = self.weights or tuple(1.0 / len(self.domains) for _ in self.domains)
        if len(weights) != len(self.domains):
            raise ValueError("one weight per domain required")
        if any(w <= 0 for w in weights):
            raise ValueError("weights must be positive")
        if abs(sum(weights) - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")
        object.__setattr__(self, "weights", tuple(weights))

    @classmethod
    def uniform(cls, domains) -> "DomainEnsemble":
        return cls(tuple(domains))


# --- map text format ------------------------------------------------------

_CHAR_FOR = {FREE: ".", OCCUPIED: "#"}


def load_map(text: str) -> GridDomain:
    """Parse the map text format.

    First line: "W H" as decimal integers. Then H lines of W characters from
    {'.', '#', 'S', 'G'}, exactly one 'S' (free start, initially facing
    south) and one 'G'. Raises MapFormatError / UnsolvableMapError.
    """
    lines = text.splitlines()
    if not lines:
        raise MapFormatError("empty map text", line=1)
    header = lines[0].split()
    if len(header) != 2:
        raise MapFormatError("header must be 'W H'", line=1)
    try:
        width, height = int(header[0]), int(header[1])
    except ValueError:
        raise MapFormatError("header must be two integers", line=1) from None
    if width < 1 or height < 1:
        raise MapFormatError("dimensions must be positive", line=1)
    if len(lines) - 1 < height:
        raise MapFormatError(f"expected {height} grid lines", line=len(lines))
    cells = np.full((height, width), FREE, dtype=np.int8)
    start = None
    goal = None
    for y in range(height):
        row = lines[1 + y]
        if len(row) != width:
            raise MapFormatError(f"expected {width} characters", line=y + 2, column=len(row) + 1)
        for x, ch in enumerate(row):
            if ch == ".":
                continue
            elif ch == "#":
                cells[y, x] = OCCUPIED
            elif ch == "S":
                if start is not None:
                    raise MapFormatError("duplicate 'S'", line=y + 2, column=x + 1)
                start = (x, y)
            elif ch == "G":
                if goal is not None:
                    raise MapFormatError("duplicate 'G'", line=y + 2, column=x + 1)
                goal = (x, y)
            else:
                raise MapFormatError(f"invalid character {ch!r}", line=y + 2, column=x + 1)
    if start is None:
        raise MapFormatError("missing 'S'", line=len(lines))
    if goal is None:
        raise MapFormatError("missing 'G'", line=len(lines))
    return GridDomain(cells, RobotState(start[0], start[1], DIR_SOUTH), goal)


def save_map(domain: GridDomain) -> str:
    """Canonical text form; inverse of load_map, deterministic."""
    rows = []
    for y in range(domain.height):
        row = [_CHAR_FOR[int(v)] for v in domain.cells[y]]
        rows.append(row)
    rows[domain.start.y][domain.start.x] = "S"
    rows[domain.goal[1]][domain.goal[0]] = "G"
    body = "\n".join("".join(r) for r in rows)
    return f"{domain.width} {domain.height}\n{body}\n"


# --- vision and knowledge -------------------------------------------------


def visible_patch(domain: GridDomain, position: Cell, cfg: VisionConfig) -> ObservationMap:
    """Single observation: the true cell values inside the vision disc.

    Entry (x, y) equals the domain value when (x0-x)^2 + (y0-y)^2 <= r^2,
    else 0. Walls do not occlude sight.
    """
    x0, y0 = position
    if not domain.is_free(x0, y0):
        raise ValueError("observation position must be a free in-bounds cell")
    r = cfg.radius
    k = int(math.floor(r))
    xs0, xs1 = max(0, x0 - k), min(domain.width, x0 + k + 1)
    ys0, ys1 = max(0, y0 - k), min(domain.height, y0 + k + 1)
    yy, xx = np.mgrid[ys0:ys1, xs0:xs1]
    mask = (xx - x0) ** 2 + (yy - y0) ** 2 <= r * r
    knowledge = np.zeros((domain.height, domain.width), dtype=np.int8)
    window = knowledge[ys0:ys1, xs0:xs1]
    window[mask] = domain.cells[ys0:ys1, xs0:xs1][mask]
    return ObservationMap(knowledge)


def accumulate(current: ObservationMap, patch: ObservationMap) -> ObservationMap:
    """Impose a new observation onto accumulated knowledge (monotone growth)."""
    a = current.knowledge
    b = patch.knowledge
    if a.shape != b.shape:
        raise ValueError("observation maps must share dimensions")
    conflict = (a != 0) & (b != 0) & (a != b)
    if conflict.any():
        y, x = np.argwhere(conflict)[0]
        raise KnowledgeConflictError(f"contradictory knowledge at ({x}, {y})")
    return ObservationMap(np.where(b != 0, b, a))


# --- kinematics -----------------------------------------------------------


def step(domain: GridDomain, state: RobotState, action: Action) -> RobotState:
    """Execute one command.

    Turns rotate in place; Forward moves one cell along the current
    direction when that cell is in bounds and free, and otherwise is a
    no-op that still counts as one executed command.
    """
    if action == Action.TURN_LEFT:
        return RobotState(state.x, state.y, turn_left(state.d))
    if action == Action.TURN_RIGHT:
        return RobotState(state.x, state.y, turn_right(state.d))
    dx, dy = DIRECTIONS[state.d]
    tx, ty = state.x + dx, state.y + dy
    if domain.is_free(tx, ty):
        return RobotState(tx, ty, state.d)
    return state


# --- procedural office-like maps ------------------------------------------


@dataclass(frozen=True)
class GeneratorParams:
    """Recursive-division tuning; defaults target office-like interiors.

    Every wall gets one door, one more per `door_every` cells of wall span,
    and possibly one extra with `extra_door_prob`.
    """

    min_room: int = 11
    extra_door_prob: float = 0.3
    door_every: int = 30
    max_retries: int = 20


def _door_count(span: int, rng, params: GeneratorParams) -> int:
    n = 1 + int(rng.random() < params.extra_door_prob)
    if params.door_every > 0:
        n += span // params.door_every
    return n


def _divide(cells: np.ndarray, x0: int, y0: int, x1: int, y1: int, rng, params):
    # Walls sit on even coordinates, doors on odd ones, so a child wall can
    # never seal a parent door; the free region stays connected.
    w = x1 - x0 + 1
    h = y1 - y0 + 1
    m = params.min_room
    wall_xs = [x for x in range(x0 + m, x1 - m + 1) if x % 2 == 0]
    wall_ys = [y for y in range(y0 + m, y1 - m + 1) if y % 2 == 0]
    can_v = w >= 2 * m + 1 and bool(wall_xs)
    can_h = h >= 2 * m + 1 and bool(wall_ys)
    if not can_v and not can_h:
        return
    if can_v and can_h:
        vertical = w > h or (w == h and rng.random() < 0.5)
    else:
        vertical = can_v
    if vertical:
        wx = int(rng.choice(wall_xs))
        door_ys = [y for y in range(y0, y1 + 1) if y % 2 == 1]
        n_doors = _door_count(h, rng, params)
        picked = rng.choice(len(door_ys), size=min(n_doors, len(door_ys)), replace=False)
        cells[y0 : y1 + 1, wx] = OCCUPIED
        for i in picked:
            cells[door_ys[int(i)], wx] = FREE
        _divide(cells, x0, y0, wx - 1, y1, rng, params)
        _divide(cells, wx + 1, y0, x1, y1, rng, params)
    else:
        wy = int(rng.choice(wall_ys))
        door_xs = [x for x in range(x0, x1 + 1) if x % 2 == 1]
        n_doors = _door_count(w, rng, params)
        picked = rng.choice(len(door_xs), size=min(n_doors, len(door_xs)), replace=False)
        cells[wy, x0 : x1 + 1] = OCCUPIED
        for i in picked:
            cells[wy, door_xs[int(i)]] = FREE
        _divide(cells, x0, y0, x1, wy - 1, rng, params)
        _divide(cells, x0, wy + 1, x1, y1, rng, params)


def generate_office_map(
    seed: int, width: int, height: int, params: GeneratorParams = GeneratorParams()
) -> GridDomain:
    """Deterministic office-like map: rooms split by walls with door gaps.

    Start is a random free cell on row 0, goal a random free cell on row
    H-1 (opposite sides); the robot initially faces south.
    """
    if width < 16 or height < 16:
        raise ValueError("generator requires width and height >= 16")
    rng = np.random.default_rng(seed)
    for _ in range(params.max_retries):
        cells = np.full((height, width), FREE, dtype=np.int8)
        _divide(cells, 0, 0, width - 1, height - 1, rng, params)
        top = np.flatnonzero(cells[0] == FREE)
        bottom = np.flatnonzero(cells[height - 1] == FREE)
        if top.size == 0 or bottom.size == 0:
            continue
        sx = int(rng.choice(top))
        gx = int(rng.choice(bottom))
        try:
            return GridDomain(cells, RobotState(sx, 0, DIR_SOUTH), (gx, height - 1))
        except (UnsolvableMapError, ValueError):
            continue
    raise MapGenerationError(
        f"no solvable {width}x{height} map after {params.max_retries} attempts (seed {seed})"
    )
