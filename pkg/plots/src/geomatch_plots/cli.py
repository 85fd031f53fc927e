"""plot_sweep command-line interface."""

from __future__ import annotations

import argparse
import sys

from geomatch_plots.render import PlotSpec, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plot_sweep", description="Render overlap-vs-noise curves from a sweep CSV."
    )
    parser.add_argument("--in", dest="input_csv", required=True, help="input sweep CSV")
    parser.add_argument("--out", dest="output_path", required=True, help="output image path")
    parser.add_argument(
        "--no-thresholds",
        action="store_true",
        help="omit the recovery-threshold marker lines",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    spec = PlotSpec(
        input_csv=args.input_csv,
        output_path=args.output_path,
        threshold_markers=not args.no_thresholds,
    )
    try:
        render(spec)
    except (SchemaError, OSError) as exc:
        print(f"plot_sweep: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.output_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
