"""CLI: python -m arealaw_plots <sweep.csv> --kind {area,convergence,sie} --out fig.svg"""

import argparse
import sys

from .figures import plot_area_scaling, plot_convergence, plot_sie_histogram
from .tables import SweepError

PLOTTERS = {
    "area": plot_area_scaling,
    "convergence": plot_convergence,
    "sie": plot_sie_histogram,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="arealaw_plots",
                                     description="Render figures from sweep CSVs")
    parser.add_argument("csv", help="sweep CSV emitted by the simulation CLI")
    parser.add_argument("--kind", choices=sorted(PLOTTERS), required=True)
    parser.add_argument("--out", default="fig.svg")
    args = parser.parse_args(argv)
    try:
        out = PLOTTERS[args.kind](args.csv, args.out)
    except SweepError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
