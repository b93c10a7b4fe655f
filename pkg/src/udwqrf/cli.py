"""Command-line entry point: ``udwqrf run CONFIG`` and ``udwqrf validate CONFIG``."""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .scenarios import EXIT_OK, SCENARIOS, ScenarioError, load_config, run, validate


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="udwqrf", description="Detector and quantum-frame numerical experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the scenario named in a config file")
    r.add_argument("config", help="INI file; [scenario] name is one of: " + ", ".join(SCENARIOS))
    r.add_argument("--output-dir", default=".", help="where the CSV and manifest go")
    r.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    r.add_argument("--seed", type=int, default=None, help="override the config seed")

    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("config")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "validate":
            rep = validate(cfg)
            for line in rep.lines():
                print(line)
            return rep.exit_code
        if args.threads < 1:
            print("error: --threads must be at least 1", file=sys.stderr)
            return 2
        res = run(cfg, args.output_dir, args.threads, args.seed)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    if res.exit_code != EXIT_OK:
        print(f"error: {res.message}", file=sys.stderr)
    else:
        print(f"wrote {res.csv_path} ({res.manifest['rows']} rows)")
        for f in res.manifest["flags"]:
            print(f"warning: {f}", file=sys.stderr)
    return res.exit_code


if __name__ == "__main__":
    sys.exit(main())
