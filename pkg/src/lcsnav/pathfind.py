"""Turn-aware shortest paths over (position, direction) states.

Distances count commands: forward moves and turns all cost 1. Queries run
against a GridView, which is either the fully known domain or the
accumulated knowledge under one of two assumptions about unknown cells
(optimistic "as free" / pessimistic "as occupied"). The goal cell is always
treated as enterable: admitted domains guarantee it is free.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np

from ._kernels import UNREACHABLE, distance_field as _distance_field
from .gridworld import (
    ACTIONS,
    DIRECTIONS,
    FREE,
    Action,
    Cell,
    FullObservation,
    GridDomain,
    ObservationMap,
    RobotState,
    turn_left,
    turn_right,
)

__all__ = [
    "UNREACHABLE",
    "UnknownMode",
    "GridView",
    "PathResult",
    "distance_field",
    "shortest_path",
    "naive_policy",
    "distance_bounds",
    "ObservationContext",
    "UnreachableGoalError",
]


class UnreachableGoalError(RuntimeError):
    """Optimistic planning failed: the domain itself must be unsolvable."""


class UnknownMode(Enum):
    AS_FREE = "free"
    AS_OCCUPIED = "occupied"


@dataclass(frozen=True)
class GridView:
    """Read-only three-valued grid plus the treatment of unknown cells."""

    grid: np.ndarray
    mode: UnknownMode = UnknownMode.AS_FREE

    @classmethod
    def from_domain(cls, domain: GridDomain) -> "GridView":
        return cls(domain.cells, UnknownMode.AS_FREE)

    @classmethod
    def from_map(cls, obs_map: ObservationMap, mode: UnknownMode) -> "GridView":
        return cls(obs_map.knowledge, mode)

    @property
    def width(self) -> int:
        return self.grid.shape[1]

    @property
    def height(self) -> int:
        return self.grid.shape[0]

    @cached_property
    def traversable(self) -> np.ndarray:
        if self.mode is UnknownMode.AS_FREE:
            return (self.grid <= 0).astype(np.uint8)
        return (self.grid == FREE).astype(np.uint8)


@dataclass(frozen=True)
class PathResult:
    """Length in commands (UNREACHABLE when no path) and the first command."""

    length: int
    first_action: Action | None

    @property
    def reachable(self) -> bool:
        return self.length < UNREACHABLE


def distance_field(view: GridView, goal: Cell) -> np.ndarray:
    """int32 (4, H, W) array of command distances from every state to the goal."""
    return _distance_field(view.traversable, goal[0], goal[1])


def _first_action(view: GridView, state: RobotState, goal: Cell, field: np.ndarray) -> Action:
    # Among equal-length paths prefer the smallest action in the fixed
    # FORWARD < TURN_LEFT < TURN_RIGHT order.
    length = field[state.d, state.y, state.x]
    trav = view.traversable
    for action in ACTIONS:
        if action == Action.FORWARD:
            dx, dy = DIRECTIONS[state.d]
            tx, ty = state.x + dx, state.y + dy
            if not (0 <= tx < view.width and 0 <= ty < view.height):
                continue
            if not (trav[ty, tx] or (tx, ty) == goal):
                continue
            if field[state.d, ty, tx] == length - 1:
                return action
        else:
            nd = turn_left(state.d) if action == Action.TURN_LEFT else turn_right(state.d)
            if field[nd, state.y, state.x] == length - 1:
                return action
    raise AssertionError("inconsistent distance field")


def shortest_path(
    view: GridView, state: RobotState, goal: Cell, field: np.ndarray | None = None
) -> PathResult:
    """Minimal command count from (position, direction) to the goal cell.

    The final direction is free. Returns PathResult(UNREACHABLE, None) when
    no path exists. A precomputed field for the same (view, goal) may be
    passed to avoid recomputation.
    """
    if field is None:
        field = distance_field(view, goal)
    length = int(field[state.d, state.y, state.x])
    if length >= UNREACHABLE:
        return PathResult(UNREACHABLE, None)
    if length == 0:
        return PathResult(0, None)
    return PathResult(length, _first_action(view, state, goal, field))


def naive_policy(obs: FullObservation, field: np.ndarray | None = None) -> Action:
    """Replanning baseline: first command of the shortest path that treats
    unknown cells as free. Complete on every solvable domain."""
    view = GridView.from_map(obs.map, UnknownMode.AS_FREE)
    result = shortest_path(view, obs.robot, obs.goal, field)
    if not result.reachable:
        raise UnreachableGoalError("goal unreachable even with unknown cells free")
    if result.length == 0:
        return Action.FORWARD
    return result.first_action


def distance_bounds(
    obs: FullObservation,
    state: RobotState,
    lower_field: np.ndarray | None = None,
    upper_field: np.ndarray | None = None,
) -> tuple[int, int]:
    """Sound sandwich for the true distance from `state` to the goal.

    lower: unknown-as-free distance; upper: unknown-as-occupied distance
    (may be UNREACHABLE). For every completion of the unknown cells the
    true distance lies in [lower, upper].
    """
    if lower_field is None:
        lower_field = distance_field(GridView.from_map(obs.map, UnknownMode.AS_FREE), obs.goal)
    if upper_field is None:
        upper_field = distance_field(GridView.from_map(obs.map, UnknownMode.AS_OCCUPIED), obs.goal)
    lower = int(lower_field[state.d, state.y, state.x])
    upper = int(upper_field[state.d, state.y, state.x])
    return min(lower, UNREACHABLE), min(upper, UNREACHABLE)


class ObservationContext:
    """Per-step cache shared by predicates and reward computation.

    Distance fields over one accumulated map are the expensive part of a
    step; every consumer of the same observation reuses them through this
    object. Build one context per executed step.
    """

    def __init__(self, obs: FullObservation):
        self.obs = obs

    @cached_property
    def free_field(self) -> np.ndarray:
        return distance_field(GridView.from_map(self.obs.map, UnknownMode.AS_FREE), self.obs.goal)

    @cached_property
    def occupied_field(self) -> np.ndarray:
        return distance_field(
            GridView.from_map(self.obs.map, UnknownMode.AS_OCCUPIED), self.obs.goal
        )

    @cached_property
    def naive_action(self) -> Action:
        return naive_policy(self.obs, self.free_field)
