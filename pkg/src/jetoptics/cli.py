"""Command-line entry point.

Exit codes: 0 all checks pass, 1 a tolerance check failed, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings

from . import report as rp
from .commands import run_classical, run_compare_connections
from .errors import JetOpticsError, NotClassical, NotIsotropic
from .scenario import resolve

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _tol(text: str) -> tuple[str, float]:
    name, sep, val = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected name=value, got {text!r}")
    try:
        return name.strip(), float(val)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad tolerance value in {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="jetoptics", description="Geometry checks for multi-time optical media.")
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="check every identity at sampled points")
    v.add_argument("scenario", help="scenario JSON file or catalog name")
    v.add_argument("--points", type=int, default=50)
    v.add_argument("--seed", type=int, default=None)
    v.add_argument("--tol", type=_tol, action="append", default=[], metavar="NAME=VALUE")
    v.add_argument("--json", dest="json_out", default=None, help="write the report here instead of stdout")
    v.add_argument("--timings", action="store_true", help="include wall-clock timings in the JSON")

    r = sub.add_parser("report", help="all tensor blocks and residuals at one point")
    r.add_argument("scenario")
    r.add_argument("--point", required=True, help='"t=..;x=..;v=.." with comma separated values')
    r.add_argument("--tol", type=_tol, action="append", default=[], metavar="NAME=VALUE")
    r.add_argument("--json", dest="json_out", default=None)

    c = sub.add_parser("compare-connections", help="fixed vs canonical spatial nonlinear connection")
    c.add_argument("scenario")
    c.add_argument("--point", required=True)
    c.add_argument("--json", dest="json_out", default=None)

    k = sub.add_parser("classical", help="single-time Synge reduction")
    k.add_argument("scenario")
    k.add_argument("--section", default=None, help="comma separated expressions V^i(x)")
    k.add_argument("--points", type=int, default=20)
    k.add_argument("--seed", type=int, default=None)
    k.add_argument("--json", dest="json_out", default=None)
    return ap


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _run(args) -> int:
    cfg = resolve(args.scenario)
    s = cfg.scenario
    if args.command == "verify":
        if args.points < 1:
            raise ValueError("--points must be positive")
        rep = rp.run_verify(cfg, args.points, args.seed, dict(args.tol))
        _emit(rep.to_json(args.timings), args.json_out)
        rp.print_summary(rep)
        return rep.exit_code
    if args.command == "report":
        u = rp.parse_point(args.point, s.p, s.n)
        rep = rp.run_report(cfg, u, dict(args.tol))
        _emit(rep.to_json(), args.json_out)
        rp.print_summary(rep)
        return rep.exit_code
    if args.command == "compare-connections":
        u = rp.parse_point(args.point, s.p, s.n)
        out = run_compare_connections(cfg, u)
        _emit(_dump(out), args.json_out)
        print(f"max |Nbar - N| = {out['max_abs_difference']:.3e}", file=sys.stderr)
        return EXIT_OK
    sections = [e.strip() for e in args.section.split(",")] if args.section else None
    out = run_classical(cfg, sections, args.points, args.seed)
    _emit(_dump(out), args.json_out)
    print(f"fundamental tensor error {out['fundamental_tensor_max_error']:.3e}, "
          f"nonlinear connection error {out['nonlinear_connection_max_error']:.3e}", file=sys.stderr)
    return EXIT_OK if out["passed"] else EXIT_FAIL


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return _run(args)
    except (NotIsotropic, NotClassical) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (JetOpticsError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
