#!/usr/bin/env python3
"""
Command-line entry point for upsilon-lab.

    python run_lab.py varadhan --config configs/varadhan_one_particle.json --out results/varadhan.csv
    python run_lab.py list-builtins

Exit codes: 0 pass, 1 operational error, 2 property violation.
"""

import argparse
import json
import logging
import sys

from pydantic import ValidationError

from config import LOG_LEVEL, OUTPUT_DIR
from core.errors import UpsilonLabError
from lab.runner import SUBCOMMANDS, load_run_config, parse_run_config, run, write_record


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="run_lab", description="Numerical laboratory for configuration spaces")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", help="JSON run config (optional for list-builtins)")
    parser.add_argument("--out", help="Output path; the verdict goes to OUT.verdict.json")
    parser.add_argument("--save", action="store_true", help="Write to OUTPUT_DIR/<subcommand>-<digest>.<format> when --out is not given")
    parser.add_argument("--seed", type=int, help="Overrides the config seed")
    parser.add_argument("--workers", type=int, help="Overrides the config worker count")
    parser.add_argument("--verbose", "-v", action="store_true", help="Log at INFO level")
    return parser


def _status(message: str) -> None:
    print(message, file=sys.stderr)


def _diagnostic(kind: str, message: str, errors: list | None = None) -> None:
    payload = {"error": kind, "message": message}
    if errors is not None:
        payload["errors"] = errors
    print(json.dumps(payload, sort_keys=True, default=str), file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else LOG_LEVEL,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    overrides = {"subcommand": args.subcommand, "seed": args.seed, "workers": args.workers}
    try:
        if args.config:
            config = load_run_config(args.config, overrides)
        elif args.subcommand == "list-builtins":
            config = parse_run_config({k: v for k, v in overrides.items() if v is not None})
        else:
            _status(f"❌ --config is required for {args.subcommand}")
            _diagnostic("usage", f"--config is required for {args.subcommand}")
            return 1

        _status(f"🚀 Running {config.subcommand} (seed={config.seed}, workers={config.workers})...")
        record = run(config)
    except ValidationError as e:
        _status("❌ Invalid run config")
        _diagnostic("validation", str(e.title), json.loads(e.json()))
        return 1
    except (UpsilonLabError, ValueError, OSError, RuntimeError) as e:
        _status(f"❌ {type(e).__name__}: {e}")
        _diagnostic(type(e).__name__, str(e))
        return 1

    out = args.out
    if out is None and args.save:
        out = OUTPUT_DIR / f"{record.subcommand}-{record.digest[:12]}.{record.body_format}"
    if out:
        verdict_path = write_record(record, out)
        _status(f"📁 Wrote {out} and {verdict_path}")
    else:
        sys.stdout.write(record.body)
        sys.stdout.write(record.verdict_json() + "\n")
        sys.stdout.flush()

    if record.passed:
        _status(f"✅ {record.subcommand} passed")
    else:
        _status(f"⚠️  {record.subcommand} found a property violation")
    return record.exit_code


if __name__ == "__main__":
    sys.exit(main())
