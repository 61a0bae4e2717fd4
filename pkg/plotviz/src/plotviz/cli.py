"""Command line entry point: plot <kind> --in <csv> --out <png/svg>."""

import argparse
import sys

from .figures import KINDS, FigureSpec, SchemaError, render


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plot", description="Render figures from spinqoc CSV outputs."
    )
    parser.add_argument("kind", choices=KINDS, help="figure kind")
    parser.add_argument("--in", dest="input_path", required=True, help="input CSV")
    parser.add_argument("--out", dest="output_path", required=True, help="output image")
    parser.add_argument(
        "--no-overlay",
        action="append",
        default=[],
        choices=["Phi", "Hoc", "gfg", "u_sing"],
        help="drop a diagnostic curve from the control trace (repeatable)",
    )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    overlays = tuple(o for o in ("Phi", "Hoc", "gfg", "u_sing") if o not in args.no_overlay)
    spec = FigureSpec(args.input_path, args.kind, args.output_path, overlays)
    try:
        render(spec)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
