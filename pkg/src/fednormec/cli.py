"""Command line entry point: ``python -m fednormec {run,sweep,verify,bound}``.

Exit codes: 0 success, 2 usage error, 3 config error, 4 verification
failure, 5 training divergence.
"""

from __future__ import annotations

import argparse
import json
import sys

from .core import ConfigError, TrainingDiverged
from .privacy import ScheduleInfeasibleError

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_VERIFY, EXIT_DIVERGED = 0, 2, 3, 4, 5


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fednormec", description="Fed-alpha-NormEC simulator")
    ap.add_argument("--seed", type=int, default=None, help="override run.seed")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, text in (("run", "run one experiment"), ("sweep", "run a parameter grid"),
                       ("bound", "print the evaluated convergence bound")):
        p = sub.add_parser(name, help=text)
        p.add_argument("config", help="YAML experiment spec")
        p.add_argument("--output", default=None, help="output root (overrides the spec and env)")
    v = sub.add_parser("verify", help="run a property suite")
    v.add_argument("suite", help="lemmas | sampling | convergence | bounds | all")
    return ap


def _load(args):
    from .config import load_config

    spec = load_config(args.config)
    if getattr(args, "output", None):
        spec.output = args.output
    return spec


def _cmd_run(args) -> int:
    from .experiment import run_experiment

    out = run_experiment(_load(args), seed=args.seed)
    print(out)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    from .experiment import run_sweep

    out = run_sweep(_load(args), seed=args.seed)
    print(out)
    return EXIT_OK


def _cmd_bound(args) -> int:
    from .experiment import _dump_json, bound_report, resolve

    res = resolve(_load(args), seed=args.seed)
    sys.stdout.write(_dump_json(bound_report(res)))
    return EXIT_OK


def _cmd_verify(args) -> int:
    from .verify import SUITES, run_suite

    if args.suite not in SUITES:
        print(f"fednormec: unknown suite {args.suite!r}; choose from {', '.join(SUITES)}", file=sys.stderr)
        return EXIT_USAGE
    reports = run_suite(args.suite, seed=0 if args.seed is None else args.seed)
    doc = {"passed": all(r.passed for r in reports), "suites": [r.to_dict() for r in reports]}
    print(json.dumps(doc, indent=2))
    return EXIT_OK if doc["passed"] else EXIT_VERIFY


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    handlers = {"run": _cmd_run, "sweep": _cmd_sweep, "bound": _cmd_bound, "verify": _cmd_verify}
    try:
        return handlers[args.command](args)
    except (ConfigError, ScheduleInfeasibleError) as exc:
        print(f"fednormec: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"fednormec: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingDiverged as exc:
        print(f"fednormec: diverged: {exc} (partial metrics written)", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
