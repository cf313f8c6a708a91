"""perpsim-plots command line: render one figure from one report CSV."""
from __future__ import annotations

import argparse
import sys

from .figures import KINDS, FigureError, FigureSpec, render


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="perpsim-plots")
    sub = parser.add_subparsers(dest="command", required=True)
    plot = sub.add_parser("plot", help="render a figure from a perpsim CSV")
    plot.add_argument("--kind", required=True,
                      help=f"one of {', '.join(KINDS)} (CamelCase accepted)")
    plot.add_argument("--in", dest="input_csv", required=True, metavar="FILE.csv")
    plot.add_argument("--out", dest="output", required=True, metavar="FIG.png")
    args = parser.parse_args(argv)

    try:
        path = render(FigureSpec(input_csv=args.input_csv, kind=args.kind, output=args.output))
    except (FigureError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
