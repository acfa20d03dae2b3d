"""figrender command line: render --in DIR --figures all|k1,k2 --out DIR."""

from __future__ import annotations

import argparse
import os
import sys

from .render import FIGURE_KINDS, SchemaMismatch, discover_specs, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="figrender", description="Render contrastlab run CSVs into figures."
    )
    parser.add_argument("--in", dest="run_dir", required=True, help="run directory")
    parser.add_argument(
        "--figures", default="all",
        help="'all' or comma-separated kinds: " + ", ".join(FIGURE_KINDS),
    )
    parser.add_argument("--out", dest="out_dir", required=True)
    parser.add_argument("--band", choices=("std", "stderr"), default="stderr")
    args = parser.parse_args(argv)

    if args.figures == "all":
        kinds = FIGURE_KINDS
    else:
        kinds = tuple(k.strip() for k in args.figures.split(",") if k.strip())
        unknown = [k for k in kinds if k not in FIGURE_KINDS]
        if unknown:
            print(f"unknown figure kind(s): {', '.join(unknown)}", file=sys.stderr)
            return 2
    os.makedirs(args.out_dir, exist_ok=True)
    specs = discover_specs(args.run_dir, args.out_dir, kinds, band=args.band)
    if not specs:
        print(f"no renderable CSVs for {kinds} in {args.run_dir}", file=sys.stderr)
        return 2
    try:
        for spec in specs:
            result = render(spec)
            print(f"wrote {result.path} ({len(result.data_digests)} series)")
    except (SchemaMismatch, OSError, ValueError) as exc:
        print(f"render error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
