"""`snapnet-plots render --kind <kind> --in <csv...> --out <png/svg>`"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import KINDS, FigureSpec, RenderError, render


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="snapnet-plots",
        description="Render figures from snapnet CSV exports",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render one figure")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--in", dest="inputs", nargs="+", required=True,
                   help="input CSV(s); the events CSV rides second where used")
    p.add_argument("--out", required=True, help="output image (.png or .svg)")
    p.add_argument("--no-shading", action="store_true",
                   help="disable phase shading on pressure-time figures")
    p.add_argument("--no-markers", action="store_true",
                   help="disable event markers")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(
        kind=args.kind,
        inputs=tuple(Path(p) for p in args.inputs),
        output=Path(args.out),
        phase_shading=not args.no_shading,
        event_markers=not args.no_markers,
    )
    try:
        out = render(spec)
    except RenderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
