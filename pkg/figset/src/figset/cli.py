"""Command-line entry point: render --kind K --in PATHS --out FILE."""

import argparse
import sys

from .render import KINDS, FigureSpec, SchemaError, render


def build_parser():
    parser = argparse.ArgumentParser(
        prog="render",
        description="Render a figure from result CSV files.")
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        metavar="CSV", help="input CSV file(s)")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--cell", help="restrict to one disturbance cell "
                        "(accuracy_curve only)")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    style = {"cell": args.cell} if args.cell else {}
    try:
        spec = FigureSpec(kind=args.kind, inputs=args.inputs,
                          output=args.out, style=style)
        render(spec)
    except (SchemaError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
