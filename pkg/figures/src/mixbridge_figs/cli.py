"""mixbridge-figs --artifacts DIR --figure NAME --out FILE.png"""

import argparse
import json
import sys

from .artifacts import MissingArtifact, SchemaMismatch
from .render import FIGURES, FigureSpec, render


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mixbridge-figs",
        description="Render figures from a mixbridge artifact tree",
    )
    p.add_argument("--artifacts", required=True, help="experiment output directory")
    p.add_argument("--figure", required=True, choices=FIGURES)
    p.add_argument("--out", required=True, help="output image file")
    p.add_argument(
        "--times", type=float, nargs="+", help="subset of slice times to draw"
    )
    p.add_argument(
        "--decimate", type=int, default=1, help="keep every k-th exported particle"
    )
    p.add_argument(
        "--no-color-by-label",
        action="store_true",
        help="draw all paths in one color",
    )
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(
        artifact_dir=args.artifacts,
        figure=args.figure,
        times=args.times,
        decimate=args.decimate,
        color_by_label=not args.no_color_by_label,
        out=args.out,
    )
    try:
        path = render(spec)
    except (MissingArtifact, SchemaMismatch, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
