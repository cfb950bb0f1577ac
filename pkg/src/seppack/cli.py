"""Command-line front end.

Exit codes: 0 pass, 1 check failed, 2 error (bad file, failed construction),
3 unsupported operation, 64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

from . import __version__
from .geometry import GeometryError, Packing
from .harness import UnverifiedPackingError, exact_failures, run_suite
from .io import PackingFile, PackingFileError, dumps, parse_body_spec, read_packing
from .optimizer import AnnealSchedule, OptimizationAborted, initial_configuration, minimize_Mi
from .records import format_table
from .render import UnsupportedRenderError, render_svg
from .separability import CapacityError, check_packing, rho_separable, totally_separable, rho_subpacking

EXIT_OK, EXIT_FAIL, EXIT_ERROR, EXIT_UNSUPPORTED, EXIT_USAGE = 0, 1, 2, 3, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _rho(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not value >= 1:
        raise argparse.ArgumentTypeError("rho must be at least 1")
    return value


def _body(text):
    try:
        return parse_body_spec(text)
    except (ValueError, GeometryError) as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _default_threads():
    env = os.environ.get("SEP_PACK_THREADS")
    if env:
        try:
            return _positive_int(env)
        except argparse.ArgumentTypeError:
            pass
    return os.cpu_count() or 1


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sep-pack", description="rho-separable translative packings")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--threads", type=_positive_int, default=None,
                   help="worker threads (default: $SEP_PACK_THREADS or the number of cores)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a verified initial configuration")
    g.add_argument("--shape", choices=("round", "sausage", "grid"), default="round")
    g.add_argument("--n", type=_positive_int, required=True)
    g.add_argument("--body", type=_body, default="disk:1")
    g.add_argument("--rho", type=_rho, default=1.0)
    g.add_argument("--out", default="-")

    v = sub.add_parser("verify", help="check overlap and rho-separability")
    v.add_argument("file")
    v.add_argument("--strict-global", action="store_true",
                   help="separating planes must also avoid elements outside the sub-packing")

    o = sub.add_parser("optimize", help="anneal towards a small mean projection")
    o.add_argument("file", nargs="?")
    o.add_argument("--n", type=_positive_int)
    o.add_argument("--body", type=_body, default="disk:1")
    o.add_argument("--rho", type=_rho, default=1.0)
    o.add_argument("--i", type=int, default=1, dest="index")
    o.add_argument("--start", choices=("round", "sausage", "grid"), default="round")
    o.add_argument("--epochs", type=_positive_int, default=100)
    o.add_argument("--moves", type=_positive_int, default=None, help="moves per epoch (default 200 n)")
    o.add_argument("--temperature", type=float, default=None, help="initial temperature (default 0.05 M_i)")
    o.add_argument("--cooling", type=float, default=0.95)
    o.add_argument("--move-scale", type=float, default=0.25)
    o.add_argument("--polish", type=int, default=5, help="zero-temperature epochs after cooling")
    o.add_argument("--allow-volume", action="store_true", help="permit i = d")
    o.add_argument("--out", default="-")
    o.add_argument("--trace", help="per-epoch CSV trace")

    c = sub.add_parser("check", help="evaluate the inequality suites")
    c.add_argument("file")
    c.add_argument("--suite", choices=("exact", "certified", "theorem", "all"), default="all")
    c.add_argument("--i", type=int, default=1, dest="index")
    c.add_argument("--out", default="-")
    c.add_argument("--table", action="store_true", help="print a table instead of JSON")

    r = sub.add_parser("render", help="SVG drawing of a planar packing")
    r.add_argument("file")
    r.add_argument("--out", default="-")
    r.add_argument("--certificates", action="store_true", help="draw separating lines of every sub-packing")
    return p


def _emit(text: str, out: str):
    if out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _load(path) -> PackingFile:
    pf = read_packing(path)
    report = check_packing(pf.packing)
    if not report.ok:
        raise PackingFileError(f"translates overlap: {report.violations[:3]}", field="centers")
    return pf


def cmd_generate(args) -> int:
    try:
        P = initial_configuration(args.n, args.body, args.rho, args.shape)
    except GeometryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    meta = {"seed": args.seed, "provenance": f"generate --shape {args.shape}"}
    _emit(dumps(P, meta), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    pf = read_packing(args.file)
    P = pf.packing
    report = check_packing(P)
    out = {"valid": report.ok, "overlaps": report.violations[:10]}
    if not report.ok:
        out["rho_separable"] = False
        print(json.dumps(out, sort_keys=True))
        return EXIT_FAIL
    res = rho_separable(P, strict_global=args.strict_global)
    out["rho_separable"] = res.separable
    out["subpackings_checked"] = res.checked
    out["fast_path"] = res.fast_path
    if res.witness is not None:
        i, (a, b) = res.witness
        out["witness"] = {"center": i, "pair": [a, b]}
    print(json.dumps(out, sort_keys=True))
    return EXIT_OK if res.separable else EXIT_FAIL


def cmd_optimize(args) -> int:
    if args.file:
        pf = _load(args.file)
        start = pf.packing
        body, rho, n = start.body, start.rho, start.n
        initial = start
    else:
        if args.n is None:
            raise UsageError("optimize needs a packing file or --n")
        body, rho, n = args.body, args.rho, args.n
        initial = args.start
    d = body.dim
    top = d if args.allow_volume else d - 1
    if not 1 <= args.index <= top:
        raise UsageError(f"--i must lie in 1..{top} for d = {d}")
    if n < 2:
        raise UsageError("optimize needs at least two translates")
    try:
        schedule = AnnealSchedule(args.temperature, args.cooling, args.moves, args.epochs, args.seed,
                                  args.move_scale, args.polish)
    except ValueError as exc:
        raise UsageError(str(exc))
    try:
        res = minimize_Mi(n, body, rho, args.index, schedule, initial=initial, allow_volume=args.allow_volume)
    except OptimizationAborted as exc:
        print(f"error: aborted: {exc}", file=sys.stderr)
        if args.trace:
            _write_trace(args.trace, exc.trace)
        return EXIT_ERROR
    meta = {
        "seed": args.seed,
        "provenance": "optimize",
        "i": args.index,
        "objective": res.objective,
        "initial_objective": res.initial_objective,
        "epochs": args.epochs,
    }
    _emit(dumps(res.packing, meta), args.out)
    if args.trace:
        _write_trace(args.trace, res.trace)
    return EXIT_OK


def _write_trace(path, trace):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "best", "current", "temperature"])
    for row in trace:
        w.writerow([row.epoch, repr(float(row.best)), repr(float(row.current)), repr(float(row.temperature))])
    _emit(buf.getvalue(), path)


def cmd_check(args) -> int:
    pf = _load(args.file)
    P = pf.packing
    if not 1 <= args.index <= P.dim:
        raise UsageError(f"--i must lie in 1..{P.dim}")
    try:
        records = run_suite(P, args.suite, args.index)
    except UnverifiedPackingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    if args.table:
        text = format_table(records) + "\n"
    else:
        text = json.dumps([r.to_dict() for r in records], indent=2, sort_keys=True) + "\n"
    _emit(text, args.out)
    return EXIT_FAIL if exact_failures(records) else EXIT_OK


def cmd_render(args) -> int:
    pf = _load(args.file)
    P = pf.packing
    if P.dim != 2:
        print("error: rendering is only available for planar packings", file=sys.stderr)
        return EXIT_UNSUPPORTED
    certs = None
    if args.certificates:
        certs = _all_certificates(P)
    _emit(render_svg(P, certs), args.out)
    return EXIT_OK


def _all_certificates(P: Packing):
    """Certificates for every distinct sub-packing (the whole packing when rho < 3)."""
    if P.rho < 3:
        subsets = [tuple(range(P.n))]
    else:
        subsets = sorted({tuple(rho_subpacking(P, i)) for i in range(P.n)})
    certs, seen = [], set()
    for sub in subsets:
        res = totally_separable(P, list(sub))
        for cert in res.certificates or []:
            u, b = cert.plane.normal, float(cert.plane.offset)
            # the same line with the opposite normal is drawn once
            if u[0] < -1e-9 or (abs(u[0]) <= 1e-9 and u[1] < 0):
                u, b = -u, -b
            key = (round(float(u[0]), 9) + 0.0, round(float(u[1]), 9) + 0.0, round(b, 9) + 0.0)
            if key not in seen:
                seen.add(key)
                certs.append(cert)
    return certs


COMMANDS = {
    "generate": cmd_generate,
    "verify": cmd_verify,
    "optimize": cmd_optimize,
    "check": cmd_check,
    "render": cmd_render,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # usage errors, --help and --version
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    if args.threads is None:
        args.threads = _default_threads()
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"sep-pack: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PackingFileError as exc:
        print(json.dumps(exc.to_dict(), sort_keys=True), file=sys.stderr)
        return EXIT_ERROR
    except UnsupportedRenderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (GeometryError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
