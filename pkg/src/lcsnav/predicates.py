"""Fuzzy predicate basis evaluated on full observations.

Every predicate maps an observation to [-1, 1] (-1 false, 1 true, 0 fully
uncertain). Gene conditions are L1-normalized linear combinations of the
basis values (see convolve). The registry fixes predicate order at build
time; gene coefficient vectors index into it positionally, so the order is
serialized alongside trained policies and must never change silently.

Families:

* vision: accumulated map values, either in a robot-relative window that
  rotates with the heading, or one predicate per absolute cell;
* position / goal: (coord - anchor) / extent for each configured anchor;
* direction: scalar product of the heading with each of the four axes;
* goal distance: 1 - 2*|p - g| / sqrt(W^2 + H^2);
* naive: one per action, 1 where the replanning baseline picks it;
* predictive forward: whether moving forward provably increases (1) or
  decreases (-1) the true distance, by comparing sound distance bounds;
* dead end: the robot's known-free pocket, with the cell behind removed,
  contains neither the goal nor a frontier to unknown space;
* obstacles: known-occupied cell on the ray ahead / left / right within
  the configured range (grid borders count as occupied).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Sequence

import numpy as np

from ._kernels import UNREACHABLE, reachable_cells
from .gridworld import (
    ACTIONS,
    DIRECTIONS,
    FREE,
    OCCUPIED,
    FullObservation,
    RobotState,
    turn_left,
    turn_right,
)
from .pathfind import ObservationContext

__all__ = [
    "RegistryConfig",
    "PredicateRegistry",
    "build_registry",
    "eval_registry",
    "convolve",
]


@dataclass(frozen=True)
class RegistryConfig:
    """Which predicate families to build and their parameters.

    Anchors must lie in [0, W] (or [0, H]) so position and goal predicates
    stay inside [-1, 1].
    """

    width: int
    height: int
    vision_mode: str = "relative"  # relative | absolute | off
    window_radius: int = 5
    x_anchors: tuple[int, ...] = ()
    y_anchors: tuple[int, ...] = ()
    goal_x_anchors: tuple[int, ...] = ()
    goal_y_anchors: tuple[int, ...] = ()
    include_direction: bool = True
    include_distance: bool = False
    include_naive: bool = False
    include_predictive: bool = False
    include_deadend: bool = False
    include_obstacles: bool = False
    ray_length: int = 5

    def __post_init__(self):
        if self.vision_mode not in ("relative", "absolute", "off"):
            raise ValueError(f"unknown vision mode {self.vision_mode!r}")
        defaults = {
            "x_anchors": (0, self.width),
            "y_anchors": (0, self.height),
            "goal_x_anchors": (0, self.width),
            "goal_y_anchors": (0, self.height),
        }
        for name, fallback in defaults.items():
            anchors = getattr(self, name)
            if not anchors:
                anchors = fallback
            limit = self.width if "x_" in name else self.height
            if any(a < 0 or a > limit for a in anchors):
                raise ValueError(f"{name} must lie in [0, {limit}]")
            object.__setattr__(self, name, tuple(int(a) for a in anchors))

    @classmethod
    def experiment(cls, width: int, height: int, radius: int = 5) -> "RegistryConfig":
        """The full navigation configuration: basic families plus the naive
        policy, dead-end detection, goal distance and obstacle rays."""
        return cls(
            width=width,
            height=height,
            vision_mode="relative",
            window_radius=radius,
            include_distance=True,
            include_naive=True,
            include_deadend=True,
            include_obstacles=True,
            ray_length=radius,
        )

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "RegistryConfig":
        kwargs = dict(data)
        for name in ("x_anchors", "y_anchors", "goal_x_anchors", "goal_y_anchors"):
            if name in kwargs:
                kwargs[name] = tuple(kwargs[name])
        return cls(**kwargs)


_OBSTACLE_SIDES = ("ahead", "left", "right")


class PredicateRegistry:
    """Ordered, immutable set of named predicates over observations."""

    def __init__(self, config: RegistryConfig):
        self.config = config
        names: list[str] = []
        if config.vision_mode == "relative":
            wr = config.window_radius
            offsets = [(f, s) for f in range(-wr, wr + 1) for s in range(-wr, wr + 1)]
            names += [f"v[{f},{s}]" for f, s in offsets]
            # World offset of window cell (f, s): f steps along the heading
            # plus s steps along the right-hand direction.
            self._window = []
            for d in range(4):
                fx, fy = DIRECTIONS[d]
                rx, ry = DIRECTIONS[turn_right(d)]
                xs = np.array([f * fx + s * rx for f, s in offsets], dtype=np.int64)
                ys = np.array([f * fy + s * ry for f, s in offsets], dtype=np.int64)
                self._window.append((xs, ys))
        elif config.vision_mode == "absolute":
            names += [
                f"va[{x},{y}]" for y in range(config.height) for x in range(config.width)
            ]
        self._n_vision = len(names)

        names += [f"px[{a}]" for a in config.x_anchors]
        names += [f"py[{a}]" for a in config.y_anchors]
        if config.include_direction:
            names += [f"dir[{dx},{dy}]" for dx, dy in DIRECTIONS]
        names += [f"gx[{a}]" for a in config.goal_x_anchors]
        names += [f"gy[{a}]" for a in config.goal_y_anchors]
        if config.include_distance:
            names.append("goal_distance")
        if config.include_naive:
            names += [f"naive[{a.name}]" for a in ACTIONS]
        if config.include_predictive:
            names.append("predictive_forward")
        if config.include_deadend:
            names.append("dead_end")
        if config.include_obstacles:
            names += [f"obstacle[{side}]" for side in _OBSTACLE_SIDES]
        if not names:
            raise ValueError("registry configuration selects no predicates")
        self.names: tuple[str, ...] = tuple(names)
        self.size = len(names)
        self._xa = np.asarray(config.x_anchors, dtype=np.float64)
        self._ya = np.asarray(config.y_anchors, dtype=np.float64)
        self._gxa = np.asarray(config.goal_x_anchors, dtype=np.float64)
        self._gya = np.asarray(config.goal_y_anchors, dtype=np.float64)
        self._diag = math.hypot(config.width, config.height)

    def index_of(self, name: str) -> int:
        return self.names.index(name)

    def evolvable_mask(self) -> np.ndarray:
        """Coordinates open to bred genes.

        The naive-policy indicators are reserved for the permanent seed
        genes: bred genes referencing them degenerate into consequence-free
        copies (or inversions) of the baseline that hijack its reward
        shares, so generation and mutation never touch those coordinates.
        """
        mask = np.ones(self.size, dtype=bool)
        for i, name in enumerate(self.names):
            if name.startswith("naive["):
                mask[i] = False
        return mask

    def evaluate(self, obs: FullObservation, ctx: ObservationContext | None = None) -> np.ndarray:
        """Predicate vector (float64, length `size`) at one observation."""
        cfg = self.config
        if ctx is None:
            ctx = ObservationContext(obs)
        out = np.empty(self.size, dtype=np.float64)
        robot = obs.robot
        knowledge = obs.map.knowledge
        h, w = knowledge.shape
        pos = 0
        if cfg.vision_mode == "relative":
            xs, ys = self._window[robot.d]
            xs = xs + robot.x
            ys = ys + robot.y
            valid = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
            block = np.zeros(len(xs), dtype=np.float64)
            block[valid] = knowledge[ys[valid], xs[valid]]
            out[pos : pos + self._n_vision] = block
            pos += self._n_vision
        elif cfg.vision_mode == "absolute":
            out[pos : pos + self._n_vision] = knowledge.reshape(-1)
            pos += self._n_vision

        out[pos : pos + len(self._xa)] = (robot.x - self._xa) / cfg.width
        pos += len(self._xa)
        out[pos : pos + len(self._ya)] = (robot.y - self._ya) / cfg.height
        pos += len(self._ya)
        if cfg.include_direction:
            dx, dy = DIRECTIONS[robot.d]
            for ox, oy in DIRECTIONS:
                out[pos] = dx * ox + dy * oy
                pos += 1
        gx, gy = obs.goal
        out[pos : pos + len(self._gxa)] = (gx - self._gxa) / cfg.width
        pos += len(self._gxa)
        out[pos : pos + len(self._gya)] = (gy - self._gya) / cfg.height
        pos += len(self._gya)
        if cfg.include_distance:
            out[pos] = 1.0 - 2.0 * math.hypot(robot.x - gx, robot.y - gy) / self._diag
            pos += 1
        if cfg.include_naive:
            naive = ctx.naive_action
            for a in ACTIONS:
                out[pos] = 1.0 if naive == a else -1.0
                pos += 1
        if cfg.include_predictive:
            out[pos] = self._predictive_forward(obs, ctx)
            pos += 1
        if cfg.include_deadend:
            out[pos] = self._dead_end(obs)
            pos += 1
        if cfg.include_obstacles:
            for side in _OBSTACLE_SIDES:
                out[pos] = self._obstacle(obs, side)
                pos += 1
        return out

    def _predictive_forward(self, obs: FullObservation, ctx: ObservationContext) -> float:
        # Nonzero only when the cell ahead is known free: otherwise forward
        # may be a blocked no-op, which neither increases nor decreases the
        # true distance.
        robot = obs.robot
        dx, dy = DIRECTIONS[robot.d]
        tx, ty = robot.x + dx, robot.y + dy
        knowledge = obs.map.knowledge
        h, w = knowledge.shape
        if not (0 <= tx < w and 0 <= ty < h) or knowledge[ty, tx] != FREE:
            return 0.0
        after = RobotState(tx, ty, robot.d)
        lo_before = int(ctx.free_field[robot.d, robot.y, robot.x])
        up_before = int(ctx.occupied_field[robot.d, robot.y, robot.x])
        lo_after = int(ctx.free_field[after.d, after.y, after.x])
        up_after = int(ctx.occupied_field[after.d, after.y, after.x])
        if up_before < UNREACHABLE and lo_after > up_before:
            return 1.0
        if up_after < lo_before:
            return -1.0
        return 0.0

    def _dead_end(self, obs: FullObservation) -> float:
        # Pocket test: flood the known-free cells from the robot with the
        # cell behind it removed. 0 when the cell behind is not known free
        # (orientation undefined), 1 when the pocket has neither the goal
        # nor a frontier to unknown space, -1 otherwise.
        robot = obs.robot
        dx, dy = DIRECTIONS[robot.d]
        bx, by = robot.x - dx, robot.y - dy
        knowledge = obs.map.knowledge
        h, w = knowledge.shape
        if not (0 <= bx < w and 0 <= by < h) or knowledge[by, bx] != FREE:
            return 0.0
        open_mask = (knowledge == FREE).astype(np.uint8)
        open_mask[by, bx] = 0
        region = reachable_cells(open_mask, robot.x, robot.y).astype(bool)
        gx, gy = obs.goal
        if region[gy, gx]:
            return -1.0
        unknown = knowledge == 0
        frontier = np.zeros_like(unknown)
        frontier[:, 1:] |= unknown[:, :-1]
        frontier[:, :-1] |= unknown[:, 1:]
        frontier[1:, :] |= unknown[:-1, :]
        frontier[:-1, :] |= unknown[1:, :]
        if (region & frontier).any():
            return -1.0
        return 1.0

    def _obstacle(self, obs: FullObservation, side: str) -> float:
        robot = obs.robot
        if side == "ahead":
            d = robot.d
        elif side == "left":
            d = turn_left(robot.d)
        else:
            d = turn_right(robot.d)
        dx, dy = DIRECTIONS[d]
        knowledge = obs.map.knowledge
        h, w = knowledge.shape
        saw_unknown = False
        for k in range(1, self.config.ray_length + 1):
            x, y = robot.x + k * dx, robot.y + k * dy
            if not (0 <= x < w and 0 <= y < h):
                return 1.0  # the border is a wall
            v = knowledge[y, x]
            if v == OCCUPIED:
                return 1.0
            if v == 0:
                saw_unknown = True
        return 0.0 if saw_unknown else -1.0


def build_registry(cfg: RegistryConfig) -> PredicateRegistry:
    """Construct the ordered predicate registry for a configuration."""
    return PredicateRegistry(cfg)


def eval_registry(
    reg: PredicateRegistry, obs: FullObservation, ctx: ObservationContext | None = None
) -> np.ndarray:
    """Evaluate every predicate of `reg` at `obs`."""
    return reg.evaluate(obs, ctx)


def convolve(alpha: Sequence[float] | np.ndarray, values: np.ndarray) -> float:
    """L1-normalized linear combination: sum(alpha * values) / ||alpha||_1.

    Always lies in [-1, 1] when values do; positive rescaling of alpha does
    not change the result.
    """
    a = np.asarray(alpha, dtype=np.float64)
    norm = np.abs(a).sum()
    assert norm > 0, "zero coefficient vector"
    return float(np.dot(a, values) / norm)
