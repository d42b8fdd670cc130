"""Command-line surface: generate-maps, train, eval, trace."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import harness


def _apply_overrides(cfg, args) -> None:
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = Path(args.out)
    if args.maps is not None:
        cfg.maps_dir = Path(args.maps)
    if getattr(args, "generations", None) is not None:
        cfg.generations = args.generations
    if getattr(args, "radius", None) is not None:
        cfg.radius = args.radius


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lcsnav", description="grid navigation policies via classifier-system search"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate-maps", help="write a deterministic office-map suite")
    gen.add_argument("--config", type=Path, help="experiment INI file")
    gen.add_argument("--seed", type=int)
    gen.add_argument("--out", type=Path)
    gen.add_argument("--maps", type=Path, help=argparse.SUPPRESS)

    train = sub.add_parser("train", help="train the configured variants")
    train.add_argument("--config", type=Path, required=True)
    train.add_argument("--seed", type=int)
    train.add_argument("--out", type=Path)
    train.add_argument("--maps", type=Path, help="train on an existing map directory")
    train.add_argument("--generations", type=int)
    train.add_argument("--radius", type=float)
    train.add_argument(
        "--variant", choices=["supervised", "classical", "retrospective"], default=None
    )

    ev = sub.add_parser("eval", help="evaluate a stored policy on a map directory")
    ev.add_argument("--policy", type=Path, required=True)
    ev.add_argument("--maps", type=Path, required=True)
    ev.add_argument("--radius", type=float, default=5.0)
    ev.add_argument("--out", type=Path, default=Path("."))

    tr = sub.add_parser("trace", help="write the pose trace of one episode")
    tr.add_argument("--policy", type=Path, required=True)
    tr.add_argument("--map", type=Path, required=True)
    tr.add_argument("--radius", type=float, default=5.0)
    tr.add_argument("--out", type=Path, default=Path("trace.csv"))
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "generate-maps":
            cfg = harness.parse_config(args.config) if args.config else harness.ExperimentConfig()
            _apply_overrides(cfg, args)
            paths = harness.cmd_generate_maps(cfg)
            print(f"wrote {len(paths)} maps to {paths[0].parent}")
        elif args.command == "train":
            cfg = harness.parse_config(args.config)
            _apply_overrides(cfg, args)
            metrics = harness.cmd_train(cfg, only_variant=args.variant)
            print(f"wrote {metrics}")
        elif args.command == "eval":
            harness.cmd_eval(args.policy, args.maps, radius=args.radius, out_dir=args.out)
        elif args.command == "trace":
            out = harness.cmd_trace(args.policy, args.map, radius=args.radius, out_path=args.out)
            print(f"wrote {out}")
        return 0
    except Exception as exc:  # single-line machine-parsable diagnostic
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
