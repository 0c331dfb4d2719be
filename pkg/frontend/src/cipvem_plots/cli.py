"""Console entry points for the plotting commands."""

import argparse
import sys

from .convergence import ERROR_COLUMNS, PlotError, plot_convergence
from .field import plot_field


def main_convergence(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cipvem-plot-convergence",
        description="log-log convergence figure from solver CSV output",
    )
    parser.add_argument("csv", nargs="+", help="convergence CSV files")
    parser.add_argument("--column", default="e_h1", choices=ERROR_COLUMNS)
    parser.add_argument("--out", default="convergence.png")
    args = parser.parse_args(argv)
    try:
        plot_convergence(args.csv, args.column, args.out)
    except (PlotError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}")
    return 0


def main_field(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cipvem-plot-field",
        description="polygon heatmap from a solver VTK field export",
    )
    parser.add_argument("vtk", help="field export file")
    parser.add_argument("--out", default="field.png")
    parser.add_argument("--title", default=None)
    args = parser.parse_args(argv)
    try:
        data = plot_field(args.vtk, args.out, args.title)
    except (PlotError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out} (min {data.vmin:.3g}, max {data.vmax:.3g})")
    return 0


if __name__ == "__main__":
    sys.exit(main_convergence())
