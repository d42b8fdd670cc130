"""Experiment orchestration: map suites, training runs, evaluation, traces.

Configuration is a flat INI file (configparser). Sections:

* ``[experiment]`` -- seed, generations, vision radius, map source
  (``maps_dir`` or ``map_count``/``map_width``/``map_height``), output dir;
* ``[registry]`` -- predicate family toggles (defaults: the full
  navigation set built by RegistryConfig.experiment);
* ``[population]`` -- EvolutionConfig overrides;
* ``[variant:NAME]`` -- one training variant per section: potential, beta,
  fusion_rule, m/m_increment, step_limit_factor.

All outputs (map files, metrics CSV, policy files, traces) are bit-exact
functions of the configuration and seed.
"""
from __future__ import annotations

import configparser
import csv
import io
import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .gridworld import (
    DIRECTIONS,
    DomainEnsemble,
    GeneratorParams,
    GridDomain,
    VisionConfig,
    generate_office_map,
    load_map,
    save_map,
)
from .lcs import (
    EvolutionConfig,
    FusionRule,
    GeneSet,
    load_policy,
    naive_seed_genes,
    save_policy,
)
from .learning import (
    CostReport,
    LearningConfig,
    Potential,
    evaluate_policy,
    run_episode,
    run_generation,
)
from .predicates import RegistryConfig, build_registry

__all__ = [
    "ExperimentConfig",
    "ConfigError",
    "RegistryMismatchError",
    "parse_config",
    "cmd_generate_maps",
    "cmd_train",
    "cmd_eval",
    "cmd_trace",
]


class ConfigError(ValueError):
    """Bad or inconsistent experiment configuration."""


class RegistryMismatchError(ValueError):
    """Policy file registry does not match the evaluation setup."""


@dataclass
class ExperimentConfig:
    seed: int = 0
    generations: int = 50
    radius: float = 5.0
    out_dir: Path = Path("runs/out")
    maps_dir: Path | None = None
    map_count: int = 20
    map_width: int = 100
    map_height: int = 100
    min_room: int = 11
    extra_door_prob: float = 0.3
    door_every: int = 30
    registry_overrides: dict = field(default_factory=dict)
    evolution: EvolutionConfig = field(default_factory=EvolutionConfig)
    variants: dict[str, LearningConfig] = field(default_factory=dict)

    def __post_init__(self):
        if not self.variants:
            self.variants = default_variants()

    def vision(self) -> VisionConfig:
        return VisionConfig(self.radius)


def default_variants() -> dict[str, LearningConfig]:
    return {
        "supervised": LearningConfig(potential=Potential.SUPERVISED),
        "classical": LearningConfig(potential=Potential.CLASSICAL),
        "retrospective": LearningConfig(potential=Potential.RETROSPECTIVE, m=0, m_increment=2),
    }


_POTENTIALS = {p.value: p for p in Potential}


def _parse_variant(section) -> LearningConfig:
    potential = _POTENTIALS.get(section.get("potential", "supervised"))
    if potential is None:
        raise ConfigError(f"unknown potential {section.get('potential')!r}")
    return LearningConfig(
        beta=section.getfloat("beta", 1.0),
        potential=potential,
        fusion_rule=FusionRule(section.getint("fusion_rule", 2)),
        m=section.getint("m", 0),
        m_increment=section.getint("m_increment", 2),
        step_limit_factor=section.getfloat("step_limit_factor", 10.0),
    )


def parse_config(path: str | Path) -> ExperimentConfig:
    """Read the INI experiment file; unknown keys raise ConfigError."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    cfg = ExperimentConfig(variants={})
    if parser.has_section("experiment"):
        exp = parser["experiment"]
        known = {
            "seed",
            "generations",
            "radius",
            "out",
            "maps_dir",
            "map_count",
            "map_width",
            "map_height",
            "min_room",
            "extra_door_prob",
            "door_every",
        }
        unknown = set(exp) - known
        if unknown:
            raise ConfigError(f"unknown [experiment] keys: {sorted(unknown)}")
        cfg.seed = exp.getint("seed", cfg.seed)
        cfg.generations = exp.getint("generations", cfg.generations)
        cfg.radius = exp.getfloat("radius", cfg.radius)
        cfg.out_dir = Path(exp.get("out", str(cfg.out_dir)))
        if exp.get("maps_dir"):
            cfg.maps_dir = Path(exp["maps_dir"])
        cfg.map_count = exp.getint("map_count", cfg.map_count)
        cfg.map_width = exp.getint("map_width", cfg.map_width)
        cfg.map_height = exp.getint("map_height", cfg.map_height)
        cfg.min_room = exp.getint("min_room", cfg.min_room)
        cfg.extra_door_prob = exp.getfloat("extra_door_prob", cfg.extra_door_prob)
        cfg.door_every = exp.getint("door_every", cfg.door_every)
    if parser.has_section("registry"):
        reg = parser["registry"]
        for key in reg:
            if key in ("vision_mode",):
                cfg.registry_overrides[key] = reg.get(key)
            elif key in ("window_radius", "ray_length"):
                cfg.registry_overrides[key] = reg.getint(key)
            elif key in (
                "include_direction",
                "include_distance",
                "include_naive",
                "include_predictive",
                "include_deadend",
                "include_obstacles",
            ):
                cfg.registry_overrides[key] = reg.getboolean(key)
            elif key in ("x_anchors", "y_anchors", "goal_x_anchors", "goal_y_anchors"):
                cfg.registry_overrides[key] = tuple(
                    int(v) for v in reg.get(key).replace(",", " ").split()
                )
            else:
                raise ConfigError(f"unknown [registry] key: {key}")
    if parser.has_section("population"):
        pop = parser["population"]
        valid = {f.name for f in fields(EvolutionConfig)}
        kwargs = {}
        for key in pop:
            if key not in valid:
                raise ConfigError(f"unknown [population] key: {key}")
            current = getattr(EvolutionConfig(), key)
            kwargs[key] = pop.getint(key) if isinstance(current, int) else pop.getfloat(key)
        cfg.evolution = EvolutionConfig(**kwargs)
    for name in parser.sections():
        if name.startswith("variant:"):
            cfg.variants[name.split(":", 1)[1]] = _parse_variant(parser[name])
    if not cfg.variants:
        cfg.variants = default_variants()
    return cfg


def registry_config_for(cfg: ExperimentConfig, width: int, height: int) -> RegistryConfig:
    base = RegistryConfig.experiment(width, height, radius=int(cfg.radius))
    if cfg.registry_overrides:
        base = replace(base, **cfg.registry_overrides)
    return base


# --- map suites -------------------------------------------------------------


def cmd_generate_maps(cfg: ExperimentConfig) -> list[Path]:
    """Write map_count generated maps plus a manifest of their seeds."""
    out = cfg.out_dir / "maps"
    out.mkdir(parents=True, exist_ok=True)
    params = GeneratorParams(
        min_room=cfg.min_room, extra_door_prob=cfg.extra_door_prob, door_every=cfg.door_every
    )
    paths = []
    manifest = {"seed": cfg.seed, "width": cfg.map_width, "height": cfg.map_height, "maps": []}
    for i in range(cfg.map_count):
        map_seed = cfg.seed * 100_000 + i
        domain = generate_office_map(map_seed, cfg.map_width, cfg.map_height, params)
        path = out / f"map-{i:03d}.txt"
        path.write_text(save_map(domain))
        manifest["maps"].append({"file": path.name, "seed": map_seed})
        paths.append(path)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    return paths


def load_map_dir(directory: str | Path) -> list[GridDomain]:
    paths = sorted(Path(directory).glob("*.txt"))
    if not paths:
        raise ConfigError(f"no .txt maps in {directory}")
    return [load_map(p.read_text()) for p in paths]


def _ensemble_for(cfg: ExperimentConfig) -> DomainEnsemble:
    if cfg.maps_dir is not None:
        domains = load_map_dir(cfg.maps_dir)
    else:
        params = GeneratorParams(
        min_room=cfg.min_room, extra_door_prob=cfg.extra_door_prob, door_every=cfg.door_every
    )
        domains = [
            generate_office_map(cfg.seed * 100_000 + i, cfg.map_width, cfg.map_height, params)
            for i in range(cfg.map_count)
        ]
    return DomainEnsemble.uniform(domains)


# --- training ---------------------------------------------------------------


def _format_row(generation: int, variant: str, report: CostReport, active: int, m: int) -> list:
    return [
        generation,
        variant,
        f"{report.mean_cost:.9f}",
        f"{report.std_cost:.9f}",
        report.failures,
        active,
        m,
    ]


def cmd_train(cfg: ExperimentConfig, only_variant: str | None = None) -> Path:
    """Train every configured variant; emit metrics.csv and per-variant
    policy files. Row 0 per variant is the learning-free evaluation of the
    seed policy."""
    ensemble = _ensemble_for(cfg)
    first = ensemble.domains[0]
    for d in ensemble.domains:
        if (d.width, d.height) != (first.width, first.height):
            raise ConfigError("all maps in one experiment must share dimensions")
    registry_config = registry_config_for(cfg, first.width, first.height)
    registry = build_registry(registry_config)
    vision = cfg.vision()
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    metrics_path = cfg.out_dir / "metrics.csv"
    variants = cfg.variants
    if only_variant is not None:
        if only_variant not in variants:
            raise ConfigError(f"unknown variant {only_variant!r}")
        variants = {only_variant: variants[only_variant]}
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["generation", "variant", "mean_cost", "std_cost", "failures", "active_genes", "M"])
    for v_index, (name, variant_cfg) in enumerate(variants.items()):
        learn_cfg = replace(variant_cfg)
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=cfg.seed, spawn_key=(1, v_index))
        )
        gene_set = GeneSet(
            naive_seed_genes(
                registry, cfg.evolution.min_lifetime, weight=cfg.evolution.seed_weight
            ),
            replace(cfg.evolution),
            breed_mask=registry.evolvable_mask(),
        )
        baseline = evaluate_policy(
            ensemble, gene_set, registry, learn_cfg.fusion_rule, vision,
            step_limit_factor=learn_cfg.step_limit_factor,
        )
        writer.writerow(_format_row(0, name, baseline, len(gene_set.active), learn_cfg.hold))
        for generation in range(1, cfg.generations + 1):
            report = run_generation(ensemble, gene_set, registry, learn_cfg, vision, rng)
            writer.writerow(
                _format_row(generation, name, report, len(gene_set.active), learn_cfg.hold)
            )
        save_policy(
            cfg.out_dir / f"policy-{name}.json", gene_set, registry_config, learn_cfg.fusion_rule
        )
    metrics_path.write_text(buf.getvalue())
    return metrics_path


# --- evaluation and tracing -------------------------------------------------


def _check_registry(registry_config: RegistryConfig, domains):
    first = domains[0]
    if (registry_config.width, registry_config.height) != (first.width, first.height):
        raise RegistryMismatchError(
            f"policy registry is {registry_config.width}x{registry_config.height}, "
            f"maps are {first.width}x{first.height}"
        )
    for d in domains:
        if (d.width, d.height) != (first.width, first.height):
            raise RegistryMismatchError("maps do not share dimensions")


def cmd_eval(
    policy_path: str | Path,
    maps_dir: str | Path,
    radius: float = 5.0,
    out_dir: str | Path = ".",
) -> CostReport:
    """Evaluate a stored policy on a map directory; print and write CSV."""
    gene_set, registry_config, fusion_rule = load_policy(policy_path)
    domains = load_map_dir(maps_dir)
    _check_registry(registry_config, domains)
    registry = build_registry(registry_config)
    ensemble = DomainEnsemble.uniform(domains)
    report = evaluate_policy(ensemble, gene_set, registry, fusion_rule, VisionConfig(radius))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "eval.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["domain", "cost"])
        for idx, cost in report.per_domain:
            writer.writerow([idx, f"{cost:.9f}"])
    print(f"mean_cost {report.mean_cost:.6f}")
    print(f"std_cost {report.std_cost:.6f}")
    print(f"failures {report.failures}")
    for idx, cost in report.per_domain:
        print(f"domain {idx:3d} cost {cost:.6f}")
    return report


def cmd_trace(
    policy_path: str | Path,
    map_path: str | Path,
    radius: float = 5.0,
    out_path: str | Path = "trace.csv",
) -> Path:
    """Replay one learning-free episode and write its pose trace.

    CSV columns: step,x,y,dx,dy,action,reached. Row 0 is the initial pose;
    the final row carries the reached flag (1 reached, 0 capped).
    """
    gene_set, registry_config, fusion_rule = load_policy(policy_path)
    domain = load_map(Path(map_path).read_text())
    _check_registry(registry_config, [domain])
    registry = build_registry(registry_config)
    cfg = LearningConfig(potential=Potential.SUPERVISED, fusion_rule=fusion_rule)
    result = run_episode(
        domain, gene_set, registry, cfg, VisionConfig(radius), learn=False, collect_trace=True
    )
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["step", "x", "y", "dx", "dy", "action", "reached"])
        for i, pose in enumerate(result.trace):
            dx, dy = DIRECTIONS[pose.d]
            action = result.commands[i - 1].name if i > 0 else ""
            reached = ""
            if i == len(result.trace) - 1:
                reached = "1" if result.reached else "0"
            writer.writerow([i, pose.x, pose.y, dx, dy, action, reached])
    return out
