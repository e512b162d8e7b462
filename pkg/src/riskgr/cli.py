"""Command-line experiment runner.

    riskgr run [SPEC] [--preset fig2|fig3|fig4] [--out DIR] [--format csv|jsonl]
               [--trials T] [--seed S] [--workers W] [--gnuplot]
    riskgr presets NAME          # print a preset as an editable YAML file

Exit status is 0 on success, 2 for an invalid experiment file or argument
and 1 for failures while running or writing results.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, dumps, load
from .experiment import PRESETS, preset, run_experiment, with_overrides
from .output import FORMATS, emit, gnuplot_script

log = logging.getLogger("riskgr")

EXIT_OK, EXIT_RUNTIME, EXIT_INVALID = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="riskgr", description="Key generation rate experiments for RIS-assisted links.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment file or a preset")
    run.add_argument("spec", nargs="?", help="YAML experiment file")
    run.add_argument("--preset", choices=PRESETS, help="built-in sweep (used when no file is given)")
    run.add_argument("--out", default=".", help="output directory (default: current directory)")
    run.add_argument("--format", choices=FORMATS, default="csv")
    run.add_argument("--trials", type=int, help="Monte Carlo rounds per row (0 or >= 10000)")
    run.add_argument("--seed", type=int, help="override the master seed")
    run.add_argument("--workers", type=int, default=1, help="worker threads (output does not depend on it)")
    run.add_argument("--gnuplot", action="store_true", help="also write a gnuplot script (csv only)")

    pre = sub.add_parser("presets", help="print a preset as YAML")
    pre.add_argument("name", choices=PRESETS)
    return p


def _load_spec(args):
    if args.spec and args.preset:
        raise ConfigError("give either an experiment file or --preset, not both", source="command line")
    if args.spec:
        spec = load(args.spec)
    elif args.preset:
        spec = preset(args.preset)
    else:
        raise ConfigError("an experiment file or --preset is required", source="command line")
    try:
        return with_overrides(spec, trials=args.trials, seed=args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc), source="command line") from exc


def _run(args) -> int:
    if args.workers < 1:
        raise ConfigError("--workers must be at least 1", source="command line")
    if args.gnuplot and args.format != "csv":
        raise ConfigError("--gnuplot needs --format csv", source="command line")
    spec = _load_spec(args)
    log.info("running %s (seed %d, trials %d, %d workers)", spec.name, spec.seed, spec.trials, args.workers)
    rows = run_experiment(spec, workers=args.workers)
    out = Path(args.out)
    path = emit(rows, out / f"{spec.name}.{args.format}", args.format)
    print(path)
    if args.gnuplot:
        script = out / f"{spec.name}.gp"
        script.write_text(gnuplot_script(path.name, rows), encoding="utf-8")
        print(script)
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "presets":
            sys.stdout.write(dumps(preset(args.name)))
            return EXIT_OK
        return _run(args)
    except ConfigError as exc:
        print(f"riskgr: invalid experiment: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        # validation inside the model classes (e.g. an impossible geometry)
        print(f"riskgr: invalid experiment: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - report, don't dump a traceback
        log.debug("failure", exc_info=True)
        print(f"riskgr: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
