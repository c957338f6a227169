"""Command-line entry point: run, campaign, sweep-dhat, replay, validate-config."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import ConfigError, ExperimentConfig, validate
from .harness import replay, run_campaign, run_episode, sweep_dhat


def _dhat(text: str):
    return None if text.lower() in ("none", "null", "off") else float(text)


def _seeds(text: str) -> tuple[int, ...]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-")
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return tuple(out)


def _add_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--scenario", choices=["coexistence", "jammer", "synthetic-linear"])
    p.add_argument("--policy", choices=["ts", "exp3", "reactive", "fixed"])
    p.add_argument("--seeds", type=_seeds, help="comma list or ranges, e.g. 0-9")
    p.add_argument("--horizon", type=int)
    p.add_argument("--dhat", type=_dhat, default=argparse.SUPPRESS, help="distortion bound or 'none'")
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int)


def load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    changes = {}
    for flag, name in (("scenario", "scenario"), ("policy", "policy"), ("seeds", "seeds"),
                       ("horizon", "horizon"), ("out", "output_dir"), ("workers", "workers")):
        v = getattr(args, flag, None)
        if v is not None:
            changes[name] = v
    if hasattr(args, "dhat"):
        changes["d_hat"] = args.dhat
    cfg = cfg.replace(**changes)
    validate(cfg)
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="radarbandit", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one episode (first seed) and write its logs")
    _add_overrides(p)
    p.add_argument("--no-write", action="store_true")

    p = sub.add_parser("campaign", help="run every seed and aggregate")
    _add_overrides(p)

    p = sub.add_parser("sweep-dhat", help="one campaign per distortion bound")
    _add_overrides(p)
    p.add_argument("--values", required=True, help="comma list, 'none' disables the constraint")

    p = sub.add_parser("replay", help="re-derive metrics from a stored episode directory")
    p.add_argument("directory")

    p = sub.add_parser("validate-config", help="check a JSON config")
    p.add_argument("config")
    return parser


def _print(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True, default=str))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        if args.command == "validate-config":
            cfg = ExperimentConfig.load(args.config)
            _print({"valid": True, "label": cfg.label})
        elif args.command == "run":
            cfg = load_config(args)
            ep = run_episode(cfg, cfg.seeds[0])
            if not args.no_write:
                ep.write(cfg.output_dir)
            _print(ep.summary())
        elif args.command == "campaign":
            res = run_campaign(load_config(args))
            _print(res.aggregate)
            if res.failures:
                return 1
        elif args.command == "sweep-dhat":
            cfg = load_config(args)
            _print(sweep_dhat(cfg, [_dhat(v) for v in args.values.split(",")]))
        elif args.command == "replay":
            out = replay(args.directory)
            _print(out)
            if not out["consistent"]:
                return 1
    except ConfigError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
