"""``seqcs`` command line: run presets or config files, list presets, run the property checks."""

from __future__ import annotations

import argparse
import sys

from ..errors import ConfigError
from .config import PRESET_DESCRIPTIONS, PRESETS, load_config

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_TRIAL_FAILED = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seqcs", description="Sequential compressed sensing experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a preset or a YAML config file")
    run.add_argument("target", help="preset name (see list-presets) or path to a YAML config")
    run.add_argument("--trials", type=int, help="number of trials")
    run.add_argument("--seed", type=int, help="master seed")
    run.add_argument("--out", help="output directory")
    run.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                     help="set a config key, dotted for nested keys (repeatable)")
    run.add_argument("--only-trial", action="append", type=int, default=None, metavar="I",
                     help="run only trial I (repeatable); seeds are unchanged")

    sub.add_parser("list-presets", help="list the built-in presets")

    verify = sub.add_parser("verify", help="run the acceptance property checks")
    verify.add_argument("--only", type=int, action="append", metavar="N", help="run only check N (repeatable)")
    return parser


def _cmd_run(args) -> int:
    from .experiments import run_experiment

    try:
        cfg = load_config(args.target, args.override, trials=args.trials, seed=args.seed, out=args.out)
        if args.only_trial:
            bad = [t for t in args.only_trial if not 0 <= t < cfg["trials"]]
            if bad:
                raise ConfigError(f"--only-trial {bad} outside [0, {cfg['trials']})")
        manifest = run_experiment(cfg, trial_indices=args.only_trial)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{manifest.experiment}: {manifest.status} in {manifest.wall_clock_s}s -> {cfg['out']}")
    for name in manifest.files:
        print(f"  {name}")
    if manifest.failures:
        for f in manifest.failures:
            print(f"  failed {f['unit']}: {f['error']}", file=sys.stderr)
        return EXIT_TRIAL_FAILED
    return EXIT_OK


def _cmd_list() -> int:
    width = max(len(p) for p in PRESETS)
    for name in PRESETS:
        print(f"{name:<{width}}  {PRESET_DESCRIPTIONS.get(name, '')}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    from ..verify import run_checks

    results = run_checks(args.only)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK_FAILED


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "list-presets":
        return _cmd_list()
    return _cmd_verify(args)


if __name__ == "__main__":
    sys.exit(main())
