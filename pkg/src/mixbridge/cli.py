"""Command-line entry point.

    mixbridge experiment <preset> [--config FILE] [--out DIR] [--seed N] [--repeats K]
    mixbridge presets
    mixbridge pairwise|couple|flow|simulate|direct|diagnose [same flags]

Stage subcommands write their own artifacts into the shared tree, so a run
can be composed piecewise. Exit codes: 0 success, 2 validation error,
3 numerical nonconvergence. Errors print machine-readable JSON on stderr.
"""

import argparse
import json
import sys

from . import config as config_mod
from . import runner
from .errors import (
    DegeneratePosterior,
    MixBridgeError,
    NonFinite,
    NotConverged,
    UnknownPreset,
)

_STAGE_COMMANDS = {
    "pairwise": ("pairwise",),
    "couple": ("pairwise", "couple"),
    "flow": ("flow",),
    "simulate": ("simulate",),
    "direct": ("direct",),
    "diagnose": ("diagnose",),
}


def _add_common(p: argparse.ArgumentParser, preset_positional: bool) -> None:
    if preset_positional:
        p.add_argument("preset", nargs="?", help="preset name (see `mixbridge presets`)")
    else:
        p.add_argument("--preset", help="preset name (see `mixbridge presets`)")
    p.add_argument("--config", help="JSON config file (overrides preset fields)")
    p.add_argument("--out", help="output directory (default: out/<name>)")
    p.add_argument("--seed", type=int, help="override the simulation seed")
    p.add_argument("--repeats", type=int, default=5, help="timing repetitions (median)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixbridge",
        description="Gaussian-mixture steering via lifted Schrödinger bridges",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("experiment", help="run a full experiment"), True)
    sub.add_parser("presets", help="list available presets")
    for name in _STAGE_COMMANDS:
        _add_common(sub.add_parser(name, help=f"run the {name} stage only"), False)
    return parser


def _load_config(args) -> config_mod.ExperimentConfig:
    if args.preset:
        cfg = config_mod.preset(args.preset)
        if args.config:
            with open(args.config) as fh:
                overrides = json.load(fh)
            base = cfg.to_dict()
            for key, val in overrides.items():
                if isinstance(val, dict) and isinstance(base.get(key), dict):
                    base[key].update(val)
                else:
                    base[key] = val
            cfg = config_mod.ExperimentConfig.from_dict(base)
        return cfg
    if args.config:
        with open(args.config) as fh:
            return config_mod.ExperimentConfig.from_json(fh.read())
    raise ValueError("provide a preset name or --config FILE")


def _error_json(exc: Exception) -> str:
    return json.dumps({"error": type(exc).__name__, "message": str(exc)})


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "presets":
        for name in config_mod.presets():
            print(name)
        return 0
    try:
        cfg = _load_config(args)
        out_dir = args.out or cfg.output_dir or f"out/{cfg.name}"
        stages = _STAGE_COMMANDS.get(args.command)
        summary = runner.run(
            cfg, out_dir, repeats=args.repeats, seed=args.seed, stages=stages
        )
    except (NotConverged, NonFinite, DegeneratePosterior) as exc:
        print(_error_json(exc), file=sys.stderr)
        return 3
    except (MixBridgeError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(_error_json(exc), file=sys.stderr)
        return 2
    if args.command == "experiment":
        headline = {
            k: summary[k]
            for k in ("name", "eps", "transport", "entropy", "total", "j_proj", "j_direct", "gap_rel")
            if k in summary
        }
        print(json.dumps(headline, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
