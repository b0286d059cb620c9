"""Command line entry point: ``filterbounds analyze <file> ...``.

Exit codes: 0 success, 2 an output is unbounded under ``--strict``,
3 parse error, 4 the empirical check found a violation.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .filters import parse_format
from .frontend import AnalysisOptions, ParseError, analyze, check, parse

EXIT_OK = 0
EXIT_UNBOUNDED = 2
EXIT_PARSE = 3
EXIT_VIOLATION = 4

log = logging.getLogger("filterbounds")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="filterbounds",
                                 description="Certified output bounds for linear filters.")
    sub = ap.add_subparsers(dest="command", required=True)
    a = sub.add_parser("analyze", help="bound the outputs of a filter network")
    a.add_argument("file", help="network source, or - for stdin")
    a.add_argument("--format", dest="fmt", type=_format_arg,
                   help="ieee32, ieee64 or fixed:<delta>[:rne] (overrides the file)")
    a.add_argument("--report", choices=("json", "text"), default="text")
    a.add_argument("--dev-max", type=int, default=4096, metavar="N",
                   help="longest series development per kernel (default 4096)")
    a.add_argument("--quantize-bits", type=int, default=512, metavar="B",
                   help="coefficient size that triggers quantization; 0 disables")
    a.add_argument("--strict", action="store_true",
                   help="exit with status 2 when an output is unbounded")
    a.add_argument("--check", action="store_true",
                   help="also simulate the network and compare with the bounds")
    a.add_argument("--steps", type=int, default=10000)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--jobs", type=int, default=1, help="threads for kernel bounds")
    a.add_argument("--no-share", action="store_true",
                   help="treat every reset register independently")
    a.add_argument("--timing", action="store_true", help="include analysis time")
    a.add_argument("-v", "--verbose", action="store_true")
    return ap


def _format_arg(text: str):
    try:
        return parse_format(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    src = sys.stdin.read() if args.file == "-" else Path(args.file).read_text()
    try:
        net = parse(src)
    except ParseError as exc:
        print(f"{args.file}:{exc}", file=sys.stderr)
        return EXIT_PARSE
    opts = AnalysisOptions(fmt=args.fmt, n_max=args.dev_max,
                           quantize_bits=args.quantize_bits or None,
                           share_resets=not args.no_share, jobs=args.jobs,
                           timing=args.timing)
    report = analyze(net, opts)
    sys.stdout.write(report.to_json() + "\n" if args.report == "json" else report.to_text())
    if args.check:
        res = check(net, report, steps=args.steps, seed=args.seed)
        for o in net.outputs:
            print(f"check {o}: observed {res.observed[o]!r} <= bound {res.bounds[o]!r}",
                  file=sys.stderr)
        for v in res.violations:
            print(f"VIOLATION {v.output} at step {v.step}: {v.value!r} > {v.bound!r}",
                  file=sys.stderr)
        if not res.passed:
            return EXIT_VIOLATION
    if args.strict and not report.bounded:
        return EXIT_UNBOUNDED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
