"""Command line front end: plot <kind> <csv...> -o <img>."""

from __future__ import annotations

import argparse
import sys

from . import KINDS, PlotError, PlotSpec, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gammanet-plot",
        description="render gammanet CSV outputs as figures",
    )
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("csvs", nargs="+", metavar="csv")
    parser.add_argument("-o", "--output", required=True,
                        help="output image path (.png or .svg)")
    parser.add_argument("--split-tau", type=float, default=10.0,
                        help="where the dual x-axes split (default 10)")
    parser.add_argument("--rescale", action="store_true",
                        help="display predictions scaled by (1 - gamma)")
    args = parser.parse_args(argv)
    spec = PlotSpec(kind=args.kind, inputs=args.csvs, output=args.output,
                    split_tau=args.split_tau, rescale=args.rescale)
    try:
        out = render(spec)
    except (PlotError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
