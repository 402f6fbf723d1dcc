"""``nvphase`` command line: one subcommand per scenario plus the acceptance runner.

Failures print a single JSON object ``{"error": ..., "message": ...}`` on
stderr and exit with status 2 (bad input) or 1 (run failure).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..config import ConfigError
from .config import ScenarioConfig
from .manifest import MANIFEST_NAME, write_result
from .scenarios import run_scenario

SUBCOMMANDS = {
    "fig2f": "fig2f",
    "fig4": "fig4ab",
    "supp-note2": "supp-note2",
    "scaling": "scaling",
    "tomo-demo": "tomo-demo",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nvphase", description="Entanglement-enhanced phase estimation experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name, help=f"run the {name} scenario")
        s.add_argument("--config", type=Path, help="key = value scenario file")
        s.add_argument("--seed", type=_u64, help="base seed (default 0)")
        s.add_argument("--noise", choices=("ideal", "paper"), help="noise preset")
        s.add_argument("--out", help="output directory (default out/<scenario>)")
        s.add_argument("--paper-scale", action="store_true", default=None,
                       help="use the full repetition numbers instead of the desk-scale defaults")
        s.add_argument("--seeds", type=int, help="Monte-Carlo repetitions per point")
        s.add_argument("--workers", type=int, help="worker processes")
    a = sub.add_parser("acceptance", help="run the acceptance criteria")
    a.add_argument("--only", help="comma-separated criterion numbers")
    return p


def _config(args) -> ScenarioConfig:
    scenario = SUBCOMMANDS[args.command]
    if args.config is not None:
        cfg = ScenarioConfig.from_file(args.config, scenario=scenario)
        family = {"fig4ab", "fig4cd"} if scenario == "fig4ab" else {scenario}
        if cfg.scenario not in family:
            raise ConfigError(f"config scenario {cfg.scenario!r} does not match command {args.command!r}")
    else:
        cfg = ScenarioConfig(scenario)
    cfg = cfg.with_overrides(seed=args.seed, noise=args.noise, paper_scale=args.paper_scale,
                             seeds=args.seeds, workers=args.workers)
    if args.out is not None:
        cfg = cfg.with_overrides(out=args.out)
    elif args.config is None:
        cfg = cfg.with_overrides(out=str(Path("out") / args.command))
    return cfg


def _fail(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail("usage", str(exc), 2)
    if args.command == "acceptance":
        from .acceptance import run_criteria

        try:
            only = [int(x) for x in args.only.split(",")] if args.only else None
            results = run_criteria(only)
        except ValueError as exc:
            return _fail("usage", str(exc), 2)
        for r in results:
            print(r.line())
        return 0 if all(r.passed for r in results) else 1
    try:
        cfg = _config(args)
    except (ConfigError, ValueError) as exc:
        return _fail("config", str(exc), 2)
    try:
        result = run_scenario(cfg)
        manifest = write_result(result, cfg.out)
    except Exception as exc:  # reported, not swallowed: nonzero exit
        return _fail(type(exc).__name__, str(exc), 1)
    for name in sorted(manifest.checksums):
        print(f"{Path(cfg.out) / name}\t{manifest.checksums[name]}")
    print(Path(cfg.out) / MANIFEST_NAME)
    return 0


if __name__ == "__main__":
    sys.exit(main())
