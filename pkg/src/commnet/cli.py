"""Command line entry point.

Subcommands mirror the pipeline stages; ``run-all`` executes them in
dependency order. Exit codes: 0 success, 1 usage error, 2 data error,
3 numeric failure. The default output directory can be set through the
COMMNET_OUT environment variable and overridden with --out.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import DataError, NumericError, UsageError
from .manifest import RunManifest
from . import __version__, pipeline

COMMANDS = ("ingest", "networks", "measures", "embed", "sigtest", "classify",
            "surrogate", "run-all", "report")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="commnet", description=__doc__)
    parser.add_argument("--version", action="version", version=f"commnet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        cmd = sub.add_parser(command)
        cmd.add_argument("--config", required=True, help="path to the JSON config file")
        cmd.add_argument("--seed", type=int, default=None, help="override the master seed")
        cmd.add_argument("--threads", type=int, default=None, help="cap worker threads")
        cmd.add_argument("--out", default=None, help="output directory "
                         "(default: config value, then $COMMNET_OUT, then ./out)")
    return parser


def _load_config(args) -> tuple:
    config = pipeline.PipelineConfig.from_file(args.config)
    if args.seed is not None:
        config.resolved["seed"] = int(args.seed)
    if args.threads is not None:
        config.resolved["threads"] = int(args.threads)
    out = args.out or os.environ.get("COMMNET_OUT") or config.resolved.get("out", "out")
    return config, out


def _dispatch(args) -> int:
    config, out = _load_config(args)
    if args.command == "run-all":
        results = pipeline.run_all(config, out)
    else:
        ctx = pipeline.RunContext.create(config, out)
        stage = {
            "ingest": pipeline.stage_ingest,
            "networks": pipeline.stage_networks,
            "measures": pipeline.stage_measures,
            "embed": pipeline.stage_embed,
            "sigtest": pipeline.stage_sigtest,
            "classify": pipeline.stage_classify,
            "surrogate": pipeline.stage_surrogate,
            "report": pipeline.stage_report,
        }[args.command]
        results = [stage(ctx)]
    for result in results:
        state = "skipped (unchanged)" if result.get("skipped") else \
            f"wrote {result.get('outputs', 0)} files"
        print(f"{result['stage']}: {state}")
    manifest = RunManifest(out, __version__)
    problems = manifest.verify()
    if problems:
        for problem in problems:
            print(f"manifest: {problem}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _dispatch(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except json.JSONDecodeError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
