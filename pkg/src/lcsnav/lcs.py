"""Gene populations, action fusion and genetic operators.

A gene is a condition-action pair: the condition is the L1-normalized
convolution of a real coefficient vector with the predicate basis, the
action one of the three commands. Gene weights accumulate reinforcement;
selection culls weak genes and refills the population with offspring, while
a restricted active zone keeps newborn genes out of fusion until they have
lived a configured minimal number of steps.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, fields
from enum import IntEnum
from pathlib import Path

import numpy as np

from .gridworld import ACTIONS, Action
from .predicates import PredicateRegistry, RegistryConfig

__all__ = [
    "FusionRule",
    "EvolutionConfig",
    "Gene",
    "GeneSet",
    "EmptyActiveZoneError",
    "PolicyFormatError",
    "eval_condition",
    "fuse_rule1",
    "fuse_rule2",
    "random_gene",
    "mutate",
    "crossover",
    "select",
    "naive_seed_genes",
    "save_policy",
    "load_policy",
]

# Weight floor for permanent seed genes: reinforcement may push them down
# but never out of the population.
_PERMANENT_FLOOR = 1e-6


class FusionRule(IntEnum):
    RULE1 = 1
    RULE2 = 2


class EmptyActiveZoneError(RuntimeError):
    """No gene is eligible for fusion; callers fall back to the naive policy."""


class PolicyFormatError(ValueError):
    """Unreadable or inconsistent policy file."""


@dataclass
class EvolutionConfig:
    """Population sizing, culling and operator parameters.

    Defaults are desk-scale: capacity 200, active zone 50, newborns
    incubate for min_lifetime steps, genes at weight <= cull_threshold are
    removed at the next selection point.
    """

    capacity: int = 200
    active_size: int = 12
    min_lifetime: int = 500
    cull_threshold: float = 0.05
    fresh_fraction: float = 0.25
    max_idle_age: int = 4000
    seed_weight: float = 30.0
    init_spread: float = 1.0
    init_zero_prob: float = 0.98
    mutation_prob: float = 0.2
    mutation_scale: float = 0.3
    coord_add_prob: float = 0.25
    coord_drop_prob: float = 0.2
    action_flip_prob: float = 0.1


@dataclass
class Gene:
    """Condition coefficients, action, reinforcement weight and birth time."""

    alpha: np.ndarray
    action: Action
    weight: float = 1.0
    birth_step: int = 0
    permanent: bool = False

    def __post_init__(self):
        alpha = np.ascontiguousarray(self.alpha, dtype=np.float64)
        alpha.setflags(write=False)
        self.alpha = alpha
        self.l1 = float(np.abs(alpha).sum())
        if self.l1 <= 0:
            raise ValueError("gene coefficients must have a positive L1 norm")


def eval_condition(gene: Gene, values: np.ndarray) -> float:
    """Condition value of one gene at one predicate vector, in [-1, 1]."""
    return float(np.dot(gene.alpha, values) / gene.l1)


class GeneSet:
    """Ordered population with an active zone and an incubation zone.

    Only active genes participate in fusion. `clock` counts executed
    training commands and drives gene ages; `mark_active` (called from
    select) recomputes the zone as the top-N genes by weight among those
    that reached the minimal lifetime.
    """

    def __init__(
        self,
        genes: list[Gene],
        cfg: EvolutionConfig | None = None,
        breed_mask: np.ndarray | None = None,
    ):
        self.genes: list[Gene] = list(genes)
        self.cfg = cfg or EvolutionConfig()
        self.clock = 0
        self.n_coefficients = len(genes[0].alpha) if genes else 0
        self.breed_mask = breed_mask
        self.weights_dirty = False
        self.mark_active(self.clock)

    def mark_active(self, current_step: int) -> None:
        eligible = []
        next_due = None
        for g in self.genes:
            if current_step - g.birth_step >= self.cfg.min_lifetime:
                eligible.append(g)
            else:
                due = g.birth_step + self.cfg.min_lifetime
                next_due = due if next_due is None else min(next_due, due)
        # Weight ties go to younger genes so that never-firing weight-1 genes
        # rotate out of the zone instead of squatting in it.
        eligible.sort(key=lambda g: (-g.weight, -g.birth_step))
        self.active: list[Gene] = eligible[: self.cfg.active_size]
        self._next_eligibility = next_due
        self.weights_dirty = False
        self._active_actions = np.fromiter((g.action for g in self.active), np.int64, len(self.active))
        if self.active:
            self._active_matrix = np.stack([g.alpha for g in self.active])
            self._active_norms = np.array([g.l1 for g in self.active])
        else:
            self._active_matrix = None
            self._active_norms = None

    def refresh_active(self, current_step: int) -> None:
        """Per-step zone maintenance: re-rank when weights moved or an
        incubating gene just reached its minimal lifetime."""
        if self.weights_dirty or (
            self._next_eligibility is not None and current_step >= self._next_eligibility
        ):
            self.mark_active(current_step)

    def _active_conditions(self, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        # Genes driven to non-positive weight are dead pending removal and
        # never fuse; they are masked out by weight here.
        if not self.active:
            raise EmptyActiveZoneError("active zone is empty")
        weights = np.fromiter((g.weight for g in self.active), np.float64, len(self.active))
        if not (weights > 0).any():
            raise EmptyActiveZoneError("no active gene with positive weight")
        cond = self._active_matrix @ values / self._active_norms
        return cond, weights


def fuse_rule1(gene_set: GeneSet, values: np.ndarray) -> tuple[Action, Gene]:
    """Single-winner fusion: the action of the active gene maximizing
    weight * condition. Ties break by action order, then insertion order."""
    cond, weights = gene_set._active_conditions(values)
    scores = np.where(weights > 0, weights * cond, -np.inf)
    best = int(np.argmax(scores))
    for i in np.flatnonzero(scores == scores[best]):
        if gene_set.active[int(i)].action < gene_set.active[best].action:
            best = int(i)
    winner = gene_set.active[best]
    return winner.action, winner


def fuse_rule2(gene_set: GeneSet, values: np.ndarray) -> tuple[Action, list[tuple[Gene, float]]]:
    """Voting fusion: per action, the weighted mean condition over genes
    with a positive condition; the best-scoring action wins.

    Returns the action plus the (gene, condition) contributions that voted
    for it, which carry the shared reward. With no positive vote anywhere
    the choice falls back to rule 1 and the contribution list is empty (no
    gene is rewarded for the fallback).
    """
    cond, weights = gene_set._active_conditions(values)
    voting = (cond > 0) & (weights > 0)
    best_action: Action | None = None
    best_score = -np.inf
    best_idx: np.ndarray | None = None
    for action in ACTIONS:
        sel = np.flatnonzero(voting & (gene_set._active_actions == action))
        if sel.size == 0:
            continue
        score = float(np.dot(weights[sel], cond[sel]) / weights[sel].sum())
        if score > best_score:
            best_score = score
            best_action = action
            best_idx = sel
    if best_action is None:
        action, _ = fuse_rule1(gene_set, values)
        return action, []
    contributions = [(gene_set.active[int(i)], float(cond[int(i)])) for i in best_idx]
    return best_action, contributions


def random_gene(
    rng: np.random.Generator,
    n: int,
    cfg: EvolutionConfig,
    birth_step: int = 0,
    mask: np.ndarray | None = None,
) -> Gene:
    """Fresh gene: sparse zero-centered coefficients, uniform action, weight 1.

    `mask` marks coordinates open to bred genes; the rest stay zero.
    """
    if n < 1:
        raise ValueError("need at least one predicate")
    while True:
        alpha = rng.normal(0.0, cfg.init_spread, n)
        alpha[rng.random(n) < cfg.init_zero_prob] = 0.0
        if mask is not None:
            alpha[~mask] = 0.0
        if np.abs(alpha).sum() > 0:
            break
    action = ACTIONS[int(rng.integers(len(ACTIONS)))]
    return Gene(alpha, action, weight=1.0, birth_step=birth_step)


def mutate(
    gene: Gene,
    rng: np.random.Generator,
    cfg: EvolutionConfig,
    birth_step: int = 0,
    mask: np.ndarray | None = None,
) -> Gene:
    """Perturb coefficients, occasionally redraw the action; the offspring
    starts over at weight 1.

    Mutation preserves sparsity: coordinates already in the support are
    perturbed with mutation_prob each, while whole coordinates are added or
    dropped with their own small probabilities. Perturbing every coordinate
    uniformly would densify genes within a few generations and was observed
    to collapse the search onto the seed policy.
    """
    action = gene.action
    if rng.random() < cfg.action_flip_prob:
        action = ACTIONS[int(rng.integers(len(ACTIONS)))]
    while True:
        alpha = gene.alpha.copy()
        support = np.flatnonzero(alpha)
        hit = support[rng.random(len(support)) < cfg.mutation_prob]
        alpha[hit] += rng.normal(0.0, cfg.mutation_scale, len(hit))
        if rng.random() < cfg.coord_add_prob:
            idx = int(rng.integers(len(alpha)))
            if mask is None or mask[idx]:
                alpha[idx] += rng.normal(0.0, cfg.init_spread)
        if len(support) >= 2 and rng.random() < cfg.coord_drop_prob:
            alpha[int(rng.choice(support))] = 0.0
        if np.abs(alpha).sum() > 0:
            return Gene(alpha, action, weight=1.0, birth_step=birth_step)


def crossover(g1: Gene, g2: Gene, rng: np.random.Generator, birth_step: int = 0) -> Gene:
    """Uniform crossover: each coefficient from either parent, action from
    a uniformly chosen parent, weight reset to 1."""
    if len(g1.alpha) != len(g2.alpha):
        raise ValueError("parents must share the coefficient length")
    action = (g1 if rng.integers(2) == 0 else g2).action
    while True:
        take_first = rng.integers(0, 2, len(g1.alpha)).astype(bool)
        alpha = np.where(take_first, g1.alpha, g2.alpha)
        if np.abs(alpha).sum() > 0:
            return Gene(alpha, action, weight=1.0, birth_step=birth_step)


def select(gene_set: GeneSet, current_step: int, rng: np.random.Generator) -> GeneSet:
    """One selection point: cull, refresh the active zone, refill.

    Removes genes at weight <= max(0, cull_threshold) (permanent seed genes
    are clamped instead), marks the top-N sufficiently aged genes active,
    then refills to capacity with mutated crossover offspring of
    weight-proportionally sampled parents plus a fraction of fresh random
    genes. Mutates `gene_set` in place and returns it.
    """
    cfg = gene_set.cfg
    threshold = max(0.0, cfg.cull_threshold)
    survivors = []
    for g in gene_set.genes:
        if g.permanent:
            g.weight = max(g.weight, _PERMANENT_FLOOR)
            survivors.append(g)
        elif g.weight <= threshold:
            continue
        elif (
            cfg.max_idle_age > 0
            and g.weight <= 1.0
            and current_step - g.birth_step > cfg.max_idle_age
        ):
            # Never-promoted incubation squatters are evicted so the refill
            # keeps producing newborns even when no weight moved at all.
            continue
        else:
            survivors.append(g)
    gene_set.genes = survivors
    gene_set.mark_active(current_step)

    deficit = cfg.capacity - len(survivors)
    if deficit <= 0:
        return gene_set
    n_fresh = int(round(deficit * cfg.fresh_fraction))
    n_offspring = deficit - n_fresh
    # Seeds are policy anchors, not breeding stock: their offspring are
    # degenerate baseline copies, so parents come from the bred population.
    parents = [g for g in gene_set.active if not g.permanent]
    if not parents:
        parents = [g for g in survivors if not g.permanent]
    n = gene_set.n_coefficients
    mask = gene_set.breed_mask
    if parents and n_offspring > 0:
        probs = np.array([g.weight for g in parents])
        probs = probs / probs.sum()
        for _ in range(n_offspring):
            i, j = rng.choice(len(parents), size=2, replace=True, p=probs)
            child = crossover(parents[int(i)], parents[int(j)], rng, birth_step=current_step)
            gene_set.genes.append(mutate(child, rng, cfg, birth_step=current_step, mask=mask))
    else:
        n_fresh = deficit
    for _ in range(n_fresh):
        gene_set.genes.append(random_gene(rng, n, cfg, birth_step=current_step, mask=mask))
    return gene_set


def naive_seed_genes(
    registry: PredicateRegistry, min_lifetime: int = 0, weight: float = 30.0
) -> list[Gene]:
    """The three permanent one-hot genes that reproduce the naive policy.

    Each puts all coefficient mass on one naive-policy predicate; born
    pre-aged so the active zone is never empty on the first episode. A
    heavy initial weight keeps the seed pools close to their maximal score
    under voting fusion, so only near-certain specialist genes (condition
    close to 1) can take a step away from the baseline.
    """
    genes = []
    for action in ACTIONS:
        idx = registry.index_of(f"naive[{action.name}]")
        alpha = np.zeros(registry.size)
        alpha[idx] = 1.0
        genes.append(
            Gene(alpha, action, weight=weight, birth_step=-min_lifetime, permanent=True)
        )
    return genes


# --- policy files -----------------------------------------------------------


def save_policy(
    path: str | Path,
    gene_set: GeneSet,
    registry_config: RegistryConfig,
    fusion_rule: FusionRule,
) -> None:
    """Self-describing JSON: registry configuration, fusion rule, evolution
    parameters and every gene. Round-trip safe."""
    doc = {
        "format": "lcsnav-policy",
        "version": 1,
        "fusion_rule": int(fusion_rule),
        "registry": registry_config.to_dict(),
        "evolution": {f.name: getattr(gene_set.cfg, f.name) for f in fields(EvolutionConfig)},
        "clock": gene_set.clock,
        "genes": [
            {
                "alpha": [float(v) for v in g.alpha],
                "action": g.action.name,
                "weight": g.weight,
                "birth_step": g.birth_step,
                "permanent": g.permanent,
            }
            for g in gene_set.genes
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_policy(path: str | Path) -> tuple[GeneSet, RegistryConfig, FusionRule]:
    """Read a policy file back; raises PolicyFormatError on any defect."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise PolicyFormatError(f"cannot read policy file: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != "lcsnav-policy":
        raise PolicyFormatError("not a lcsnav policy file")
    try:
        registry_config = RegistryConfig.from_dict(doc["registry"])
        fusion_rule = FusionRule(doc["fusion_rule"])
        cfg = EvolutionConfig(**doc["evolution"])
        genes = [
            Gene(
                np.array(g["alpha"], dtype=np.float64),
                Action[g["action"]],
                weight=float(g["weight"]),
                birth_step=int(g["birth_step"]),
                permanent=bool(g["permanent"]),
            )
            for g in doc["genes"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise PolicyFormatError(f"malformed policy file: {exc}") from exc
    gene_set = GeneSet(genes, cfg)
    gene_set.clock = int(doc.get("clock", 0))
    gene_set.mark_active(gene_set.clock)
    return gene_set, registry_config, fusion_rule
