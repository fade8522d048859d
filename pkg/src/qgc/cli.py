"""``qgc`` command line: run bundled or user scenarios.

Exit codes: 0 when every check passes, 1 when a check fails or a scenario
step errors, 2 for usage and configuration errors.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from importlib import resources
from pathlib import Path

from .config import ConfigError, load_config
from .scenarios import ScenarioError, audit_config, run_scenario

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _bundled_dir() -> Path:
    return Path(str(resources.files("qgc") / "data" / "scenarios"))


def list_scenarios() -> list[dict]:
    """Catalog of bundled scenarios with name, kind, description and path."""
    from .config import tomllib
    out = []
    for path in sorted(_bundled_dir().glob("*.toml")):
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
        out.append({"name": raw.get("name", path.stem), "kind": raw.get("kind", ""),
                    "description": raw.get("description", ""), "path": str(path)})
    return out


def resolve_config(ref: str) -> Path:
    """A path as given, or the bundled scenario of that name."""
    p = Path(ref)
    if p.is_file():
        return p
    bundled = _bundled_dir() / f"{ref}.toml"
    if bundled.is_file():
        return bundled
    raise ConfigError(f"no config file or bundled scenario named {ref!r}")


def _report(result, as_json: bool, elapsed: float) -> None:
    summary = result.summary()
    if as_json:
        summary["elapsed_s"] = round(elapsed, 3)
        print(json.dumps(summary, indent=2, sort_keys=True, default=str))
        return
    cfg = result.config
    print(f"scenario {cfg.name} ({cfg.kind}), N={cfg.N}, backend {summary['backend']}")
    for name, value in sorted(cfg.echo.items()):
        print(f"  parsed {name} = {value}")
    for c in result.checks:
        v = f"{c.value:.6g}" if isinstance(c.value, (int, float)) else str(c.value)
        print(f"  {'PASS' if c.passed else 'FAIL'}  {c.name}: {v}  ({c.criterion})")
    for key in sorted(result.info):
        print(f"  info  {key}: {result.info[key]}")
    print(f"  outputs in {cfg.out_dir} ({elapsed:.2f} s)")
    print("PASS" if result.passed else "FAIL")


def _run(args, audit: bool) -> int:
    cfg = load_config(resolve_config(args.config), out_dir=args.out, seed=args.seed)
    if audit:
        cfg = audit_config(cfg)
    t0 = time.perf_counter()
    result = run_scenario(cfg)
    _report(result, args.json, time.perf_counter() - t0)
    return EXIT_OK if result.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qgc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("run", "run a scenario"),
                            ("audit", "run only the assumption checks of a scenario")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="TOML file or bundled scenario name")
        p.add_argument("--out", type=Path, default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="random seed override")
        p.add_argument("--json", action="store_true", help="print the summary as JSON")
    p = sub.add_parser("list", help="list bundled scenarios")
    p.add_argument("--json", action="store_true", help="machine-readable catalog")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if args.command == "list":
            cat = list_scenarios()
            if args.json:
                print(json.dumps(cat, indent=2))
            else:
                for entry in cat:
                    print(f"{entry['name']:<24} {entry['kind']:<20} {entry['description']}")
            return EXIT_OK
        return _run(args, audit=args.command == "audit")
    except ConfigError as exc:
        print(f"qgc: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ScenarioError as exc:
        print(f"qgc: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
