"""Command line entry point: ``dinavd run|preset|list-presets|verify-lemmas``."""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import analysis, experiment, presets
from .errors import DinavdError, InvalidArgument

EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _report(outcome):
    print(json.dumps(outcome.report, indent=2, sort_keys=True))
    return outcome.exit_code


def _fail(exc, code):
    print(json.dumps(experiment.error_document(exc), sort_keys=True))
    return code


def _execute(cfg, out_dir, base_dir=None):
    try:
        experiment.parse_config(cfg, base_dir)
    except (InvalidArgument, KeyError, TypeError, ValueError) as exc:
        return _fail(exc, EXIT_CONFIG)
    try:
        os.makedirs(out_dir, exist_ok=True)
        if not os.access(out_dir, os.W_OK):
            raise OSError(f"output directory {out_dir!r} is not writable")
    except OSError as exc:
        return _fail(exc, EXIT_CONFIG)
    try:
        return _report(experiment.run(cfg, out_dir, base_dir))
    except (DinavdError, OSError, ArithmeticError) as exc:
        return _fail(exc, EXIT_RUNTIME)


def cmd_run(args):
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        return _fail(exc, EXIT_CONFIG)
    out = args.out or (cfg.get("output") if isinstance(cfg, dict) else None) or "."
    return _execute(cfg, out, os.path.dirname(os.path.abspath(args.config)))


def cmd_preset(args):
    try:
        cfg = presets.preset_config(args.name)
    except InvalidArgument as exc:
        return _fail(exc, EXIT_CONFIG)
    return _execute(cfg, args.out or os.path.join("runs", args.name))


def cmd_list(args):
    print(presets.list_presets())
    return 0


def cmd_lemmas(args):
    if args.trials < 1000:
        return _fail(InvalidArgument(f"--trials must be at least 1000, got {args.trials}"),
                     EXIT_CONFIG)
    rep = analysis.check_inequality_lemmas(args.seed, args.trials)
    print(json.dumps(rep.to_dict(), indent=2, sort_keys=True))
    return 0 if rep.passed else 1


def build_parser():
    p = argparse.ArgumentParser(prog="dinavd", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a JSON experiment config")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (overrides the config)")
    r.set_defaults(func=cmd_run)
    q = sub.add_parser("preset", help="run a named preset")
    q.add_argument("name")
    q.add_argument("--out", help="output directory (default runs/<name>)")
    q.set_defaults(func=cmd_preset)
    sub.add_parser("list-presets", help="list presets").set_defaults(func=cmd_list)
    v = sub.add_parser("verify-lemmas", help="randomized check of the scalar inequalities")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--trials", type=int, default=10000)
    v.set_defaults(func=cmd_lemmas)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
