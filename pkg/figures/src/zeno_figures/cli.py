"""`figures render --manifest <path> --kind fig2|fig3|eigenspectrum|posterior --out <file>`."""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, FigureSpec, RenderError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="figures",
                                     description="Render figures from zeno-nh runs")
    sub = parser.add_subparsers(dest="command")
    p = sub.add_parser("render", help="render one figure")
    p.add_argument("--manifest", required=True)
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--out", required=True)
    p.add_argument("--title", default=None)

    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        out, _ = render(FigureSpec(manifest=args.manifest, kind=args.kind,
                                   out=args.out, title=args.title))
    except (RenderError, FileNotFoundError) as exc:
        print(f"render failed: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
