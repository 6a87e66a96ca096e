"""Command-line entry point: ``v2v-isac {validate,train,eval,postprocess}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..agents.checkpoint import CheckpointError
from .config import ConfigError, dump_config, load_config
from .runner import evaluate, postprocess, train

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="v2v-isac", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a config file and print the resolved values")
    p.add_argument("--config", required=True)

    p = sub.add_parser("train", help="train an agent and write metrics + checkpoint")
    p.add_argument("--config", required=True)
    p.add_argument("--agent", choices=["ppo", "a2c"])
    p.add_argument("--reward", choices=["aou", "queue"])
    p.add_argument("--scenario", choices=["poor", "normal", "strong"])
    p.add_argument("--seed", type=int)
    p.add_argument("--iters", type=int, dest="iterations")
    p.add_argument("--episodes", type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="evaluate a checkpoint greedily")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("postprocess", help="add a min-max normalized reward column")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "postprocess":
            print(postprocess(args.in_path, args.out))
            return EXIT_OK

        overrides = {}
        if args.command == "train":
            for key in ("agent", "reward", "scenario", "seed", "iterations", "episodes"):
                if getattr(args, key) is not None:
                    overrides[f"run.{key}"] = getattr(args, key)
            overrides["run.out_dir"] = args.out
        config = load_config(args.config, overrides)

        if args.command == "validate":
            print(dump_config(config))
        elif args.command == "train":
            result = train(config, out_dir=args.out)
            print(f"wrote {result.metrics_path} and {result.checkpoint_path}")
        elif args.command == "eval":
            result = evaluate(config, checkpoint=args.checkpoint, out_dir=args.out)
            summary_path = Path(args.out) / "eval_summary.json"
            summary_path.write_text(json.dumps(result.summary, indent=2, sort_keys=True) + "\n")
            print(json.dumps(result.summary, indent=2, sort_keys=True))
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (OSError, CheckpointError, ValueError, RuntimeError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
