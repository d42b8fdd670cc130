"""Potential-difference rewards, episode execution and generation training.

Reward for one executed command is beta * deltaC, where deltaC is the
normalized decrease of the shortest-command distance to the goal caused by
the command. Three potentials are supported:

* supervised -- distances on the fully known domain (training-only
  information);
* classical -- distances estimated on the accumulated map at decision time,
  unknown cells treated as free (the potential the naive baseline descends);
* retrospective -- the classical estimate recomputed M steps later, when
  the map knows more; evaluations are buffered and flushed at step t+M or
  at episode end, whichever comes first. M may grow every generation.

Classical is exactly the retrospective path with M pinned to 0.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._kernels import UNREACHABLE
from .gridworld import (
    Action,
    Cell,
    DomainEnsemble,
    FullObservation,
    GridDomain,
    ObservationMap,
    RobotState,
    VisionConfig,
    accumulate,
    step,
    visible_patch,
)
from .lcs import (
    EmptyActiveZoneError,
    FusionRule,
    Gene,
    GeneSet,
    fuse_rule1,
    fuse_rule2,
    select,
)
from .pathfind import GridView, ObservationContext, UnknownMode, distance_field
from .predicates import PredicateRegistry

__all__ = [
    "Potential",
    "LearningConfig",
    "EpisodeResult",
    "CostReport",
    "delta_c_supervised",
    "delta_c_estimated",
    "RetrospectiveBuffer",
    "PendingEvaluation",
    "apply_reward_rule1",
    "apply_reward_rule2",
    "run_episode",
    "run_generation",
    "evaluate_policy",
]

_PERMANENT_FLOOR = 1e-6


class Potential(Enum):
    SUPERVISED = "supervised"
    CLASSICAL = "classical"
    RETROSPECTIVE = "retrospective"


@dataclass
class LearningConfig:
    """Reward and episode parameters for one training variant.

    `m` is the current retrospective hold and is advanced in place by
    run_generation according to the schedule; classical mode ignores it.
    Episodes abort after step_limit_factor * W * H commands.
    """

    beta: float = 1.0
    potential: Potential = Potential.SUPERVISED
    fusion_rule: FusionRule = FusionRule.RULE2
    m: int = 0
    m_increment: int = 2
    step_limit_factor: float = 10.0

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.m < 0:
            raise ValueError("M must be non-negative")
        if self.step_limit_factor <= 0:
            raise ValueError("step limit factor must be positive")

    @property
    def hold(self) -> int:
        return self.m if self.potential is Potential.RETROSPECTIVE else 0


@dataclass
class EpisodeResult:
    """Executed command sequence and its normalized cost.

    cost = len(commands) / optimal when the goal was reached, else
    step_limit / optimal (strictly worse than any reached episode).
    """

    commands: list[Action]
    reached: bool
    cost: float
    optimal_length: int
    trace: list[RobotState] | None = None
    inconsistent: bool = False


@dataclass
class CostReport:
    """Ensemble-weighted mean/stddev plus per-domain costs (by domain index)."""

    mean_cost: float
    std_cost: float
    per_domain: list[tuple[int, float]]
    failures: int = 0


def delta_c_supervised(
    domain: GridDomain,
    s: RobotState,
    s_next: RobotState,
    s0: RobotState,
    field: np.ndarray | None = None,
) -> float:
    """(rho(s) - rho(s')) / rho(s0) on the fully known domain."""
    if field is None:
        field = domain.goal_distance_field
    rho0 = int(field[s0.d, s0.y, s0.x])
    rho_a = int(field[s.d, s.y, s.x])
    rho_b = int(field[s_next.d, s_next.y, s_next.x])
    assert rho0 > 0 and max(rho0, rho_a, rho_b) < UNREACHABLE, "domain must be solvable"
    return (rho_a - rho_b) / rho0


def _delta_c_from_field(
    field: np.ndarray, s: RobotState, s_next: RobotState, s0: RobotState
) -> tuple[float, bool]:
    rho0 = int(field[s0.d, s0.y, s0.x])
    rho_a = int(field[s.d, s.y, s.x])
    rho_b = int(field[s_next.d, s_next.y, s_next.x])
    if max(rho0, rho_a, rho_b) >= UNREACHABLE or rho0 == 0:
        return 0.0, False
    return (rho_a - rho_b) / rho0, True


def delta_c_estimated(
    obs_map: ObservationMap,
    goal: Cell,
    s: RobotState,
    s_next: RobotState,
    s0: RobotState,
    field: np.ndarray | None = None,
) -> float:
    """Same difference with distances estimated on the accumulated map,
    unknown cells treated as free. Returns 0.0 when any distance is
    unreachable (inconsistent domain; callers flag the episode)."""
    if field is None:
        field = distance_field(GridView.from_map(obs_map, UnknownMode.AS_FREE), goal)
    value, _ = _delta_c_from_field(field, s, s_next, s0)
    return value


@dataclass
class PendingEvaluation:
    """One executed transition awaiting its potential evaluation."""

    step: int
    state_before: RobotState
    state_after: RobotState
    credit: "Gene | list[tuple[Gene, float]] | None"


class RetrospectiveBuffer:
    """Holds transitions until their evaluation map is available.

    The transition executed at step t is evaluated against the accumulated
    map of step t + M: due entries are flushed through `flush_due` while the
    episode runs and `flush_all` at termination.
    """

    def __init__(self, hold: int):
        self.hold = hold
        self._entries: deque[PendingEvaluation] = deque()

    def push(self, entry: PendingEvaluation) -> None:
        self._entries.append(entry)

    def flush_due(self, now: int) -> list[PendingEvaluation]:
        due = []
        while self._entries and self._entries[0].step + self.hold <= now:
            due.append(self._entries.popleft())
        return due

    def flush_all(self) -> list[PendingEvaluation]:
        due = list(self._entries)
        self._entries.clear()
        return due


def _clamp_permanent(gene: Gene) -> None:
    if gene.permanent and gene.weight < _PERMANENT_FLOOR:
        gene.weight = _PERMANENT_FLOOR


def apply_reward_rule1(gene_set: GeneSet, winner: Gene, delta_c: float, beta: float) -> None:
    """Only the winning gene is rewarded or penalized."""
    if delta_c == 0.0:
        return
    winner.weight += beta * delta_c
    _clamp_permanent(winner)
    gene_set.weights_dirty = True


def apply_reward_rule2(
    gene_set: GeneSet,
    contributions: list[tuple[Gene, float]],
    delta_c: float,
    beta: float,
) -> None:
    """Reward shared by all genes that voted for the performed action,
    proportionally to their condition values (which sum to the normalizer)."""
    z = sum(c for _, c in contributions)
    if z <= 0 or delta_c == 0.0:
        return
    r = beta * delta_c / z
    for gene, c in contributions:
        gene.weight += r * c
        _clamp_permanent(gene)
    gene_set.weights_dirty = True


def run_episode(
    domain: GridDomain,
    gene_set: GeneSet,
    registry: PredicateRegistry,
    cfg: LearningConfig,
    vision: VisionConfig,
    learn: bool = True,
    collect_trace: bool = False,
    initial_knowledge: ObservationMap | None = None,
) -> EpisodeResult:
    """Run one episode from the domain start until the goal or the step cap.

    Per step: observe and accumulate, evaluate the registry, fuse the
    configured rule (falling back to the naive policy if the active zone is
    empty), execute, and -- when learning -- credit gene weights with
    beta * deltaC under the configured potential. Training commands advance
    the gene-set clock used for incubation ages.
    """
    state = domain.start
    goal = domain.goal
    knowledge = initial_knowledge or ObservationMap.unknown(domain.width, domain.height)
    knowledge = accumulate(knowledge, visible_patch(domain, state.position, vision))
    s0 = state
    optimal = domain.optimal_length
    step_limit = int(math.ceil(cfg.step_limit_factor * domain.width * domain.height))
    supervised = cfg.potential is Potential.SUPERVISED
    true_field = domain.goal_distance_field if (learn and supervised) else None
    buffer = RetrospectiveBuffer(cfg.hold) if (learn and not supervised) else None
    commands: list[Action] = []
    trace = [state] if collect_trace else None
    inconsistent = False
    t = 0

    def settle(entry: PendingEvaluation, ctx: ObservationContext) -> None:
        nonlocal inconsistent
        dc, ok = _delta_c_from_field(
            ctx.free_field, entry.state_before, entry.state_after, s0
        )
        if not ok:
            inconsistent = True
        _apply(entry, dc)

    def _apply(entry: PendingEvaluation, dc: float) -> None:
        if entry.credit is None:
            return
        if cfg.fusion_rule == FusionRule.RULE1:
            apply_reward_rule1(gene_set, entry.credit, dc, cfg.beta)
        else:
            apply_reward_rule2(gene_set, entry.credit, dc, cfg.beta)


    while state.position != goal and len(commands) < step_limit:
        if learn:
            gene_set.refresh_active(gene_set.clock)
        obs = FullObservation(state, knowledge, goal)
        ctx = ObservationContext(obs)
        values = registry.evaluate(obs, ctx)
        credit: Gene | list[tuple[Gene, float]] | None
        try:
            if cfg.fusion_rule == FusionRule.RULE1:
                action, credit = fuse_rule1(gene_set, values)
            else:
                action, credit = fuse_rule2(gene_set, values)
        except EmptyActiveZoneError:
            action = ctx.naive_action
            credit = None
        new_state = step(domain, state, action)
        commands.append(action)
        if collect_trace:
            trace.append(new_state)
        if learn:
            gene_set.clock += 1
            entry = PendingEvaluation(t, state, new_state, credit)
            if supervised:
                _apply(entry, delta_c_supervised(domain, state, new_state, s0, true_field))
            else:
                buffer.push(entry)
                for due in buffer.flush_due(t):
                    settle(due, ctx)
        if not learn and new_state == state:
            # Blocked forward during evaluation is a fixed point: weights,
            # knowledge and therefore fusion can never change again, so the
            # episode provably repeats this command until the step cap.
            # Skip ahead; the result is identical to playing it out. (While
            # learning, incubating genes age into the active zone and change
            # fusion, so no such shortcut exists.)
            remaining = step_limit - len(commands)
            commands.extend([action] * remaining)
            if collect_trace:
                trace.extend([new_state] * remaining)
            break
        state = new_state
        knowledge = accumulate(knowledge, visible_patch(domain, state.position, vision))
        t += 1

    if buffer is not None:
        remaining = buffer.flush_all()
        if remaining:
            final_ctx = ObservationContext(FullObservation(state, knowledge, goal))
            for due in remaining:
                settle(due, final_ctx)

    reached = state.position == goal
    cost = (len(commands) if reached else step_limit) / optimal
    return EpisodeResult(commands, reached, cost, optimal, trace, inconsistent)


def _weighted_report(ensemble: DomainEnsemble, costs: dict[int, float], failures: int) -> CostReport:
    per_domain = sorted(costs.items())
    weights = np.asarray(ensemble.weights)
    values = np.array([c for _, c in per_domain])
    mean = float(np.dot(weights, values))
    std = float(math.sqrt(np.dot(weights, (values - mean) ** 2)))
    return CostReport(mean, std, per_domain, failures)


def run_generation(
    ensemble: DomainEnsemble,
    gene_set: GeneSet,
    registry: PredicateRegistry,
    cfg: LearningConfig,
    vision: VisionConfig,
    rng: np.random.Generator,
) -> CostReport:
    """One training pass: every domain once in shuffled order, learning on,
    a selection point after each episode, then the M schedule increment."""
    costs: dict[int, float] = {}
    failures = 0
    order = rng.permutation(len(ensemble.domains))
    for idx in order:
        result = run_episode(
            ensemble.domains[int(idx)], gene_set, registry, cfg, vision, learn=True
        )
        costs[int(idx)] = result.cost
        failures += 0 if result.reached else 1
        select(gene_set, gene_set.clock, rng)
    if cfg.potential is Potential.RETROSPECTIVE:
        cfg.m += cfg.m_increment
    return _weighted_report(ensemble, costs, failures)


def evaluate_policy(
    ensemble: DomainEnsemble,
    gene_set: GeneSet,
    registry: PredicateRegistry,
    fusion_rule: FusionRule,
    vision: VisionConfig,
    step_limit_factor: float = 10.0,
) -> CostReport:
    """Learning-free cost of the current policy over the ensemble."""
    cfg = LearningConfig(
        potential=Potential.SUPERVISED,
        fusion_rule=fusion_rule,
        step_limit_factor=step_limit_factor,
    )
    costs: dict[int, float] = {}
    failures = 0
    for idx, domain in enumerate(ensemble.domains):
        result = run_episode(domain, gene_set, registry, cfg, vision, learn=False)
        costs[idx] = result.cost
        failures += 0 if result.reached else 1
    return _weighted_report(ensemble, costs, failures)
