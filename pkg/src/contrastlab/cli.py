"""Command-line entry point.

Subcommands: grad-consistency, gibbs-sphere, mm-gap, selftest. Parameters
come from built-in defaults, then an optional key = value config file,
then repeatable --override key=value flags. Exit codes: 0 success,
1 check failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .diagnostics import read_config
from .errors import ParseError
from .experiments import CONFIG_TYPES, RUNNERS, build_config, run_selftest

_SUBCOMMANDS = {
    "grad-consistency": "grad_consistency",
    "gibbs-sphere": "gibbs_sphere",
    "mm-gap": "mm_gap",
    "selftest": "selftest",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="contrastlab",
        description="Contrastive-geometry experiments: gradient consistency, "
        "sphere concentration, and the multimodal marginal gap.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="key = value parameter file")
        p.add_argument("--out", default="runs", help="output directory for CSVs")
        p.add_argument("--seeds", type=int, default=None)
        p.add_argument("--seed-base", type=int, default=None)
        p.add_argument("--jobs", type=int, default=None)
        p.add_argument(
            "--override",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override any config field (repeatable)",
        )
    return parser


def _collect_overrides(args, experiment: str) -> dict[str, str]:
    overrides: dict[str, str] = {}
    if args.config is not None:
        cfg = read_config(args.config)
        known = {f.name for f in dataclasses.fields(CONFIG_TYPES[experiment])}
        for key in cfg.keys():
            if key in known:
                overrides[key] = cfg.get_str(key)
            else:
                print(f"warning: ignoring unknown config key {key!r}", file=sys.stderr)
    for item in args.override:
        if "=" not in item:
            raise ParseError(f"--override expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    if args.seeds is not None:
        overrides["seeds"] = str(args.seeds)
    if args.seed_base is not None:
        overrides["seed_base"] = str(args.seed_base)
    if args.jobs is not None:
        overrides["jobs"] = str(args.jobs)
    return overrides


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    experiment = _SUBCOMMANDS[args.command]
    try:
        overrides = _collect_overrides(args, experiment)
        cfg = build_config(experiment, overrides)
    except (ParseError, KeyError, ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if experiment == "selftest":
        checks = run_selftest(cfg, args.out)
        failed = [c for c in checks if not c.ok]
        for c in checks:
            status = "PASS" if c.ok else "FAIL"
            print(f"[{status}] {c.name}: margin={c.margin:.3e} {c.detail}")
        return 1 if failed else 0
    summary = RUNNERS[experiment](cfg, args.out)
    print(f"{args.command}: wrote outputs to {args.out} ({len(summary)} sweep points)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
