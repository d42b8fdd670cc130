"""Grid-world navigation policies evolved with a weight-reinforced
classifier system over a fuzzy predicate basis."""

from ._kernels import BACKEND, UNREACHABLE
from .gridworld import (
    ACTIONS,
    DIRECTIONS,
    FREE,
    OCCUPIED,
    UNKNOWN,
    Action,
    DomainEnsemble,
    FullObservation,
    GeneratorParams,
    GridDomain,
    ObservationMap,
    RobotState,
    VisionConfig,
    accumulate,
    generate_office_map,
    load_map,
    save_map,
    step,
    visible_patch,
)
from .lcs import (
    EvolutionConfig,
    FusionRule,
    Gene,
    GeneSet,
    crossover,
    eval_condition,
    fuse_rule1,
    fuse_rule2,
    load_policy,
    mutate,
    naive_seed_genes,
    random_gene,
    save_policy,
    select,
)
from .learning import (
    CostReport,
    EpisodeResult,
    LearningConfig,
    Potential,
    delta_c_estimated,
    delta_c_supervised,
    evaluate_policy,
    run_episode,
    run_generation,
)
from .pathfind import (
    GridView,
    ObservationContext,
    PathResult,
    UnknownMode,
    distance_bounds,
    distance_field,
    naive_policy,
    shortest_path,
)
from .predicates import PredicateRegistry, RegistryConfig, build_registry, convolve, eval_registry

__version__ = "0.1.0"
