"""``qswap`` command line: run, sweep, verify, list.

Exit codes: 0 success, 1 usage/parse/engine error, 2 failed assertion or check.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
import time

from . import __version__, checks, library
from .dsl import QspSyntaxError, parse
from .engine import ProtocolError, run
from .hilbert import HilbertError
from .report import FORMATTERS, build_document

EXIT_OK, EXIT_ERROR, EXIT_FAILED = 0, 1, 2
SWEEP_COLUMNS = ("parameter", "success_probability", "bell_fidelity")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _err(msg: str) -> int:
    print(f"qswap: {msg}", file=sys.stderr)
    return EXIT_ERROR


def load_protocol(source: str, alpha=None, gtau=None):
    """``builtin:NAME`` or a path to a ``.qsp`` file."""
    if source.startswith("builtin:"):
        try:
            return library.get_builtin(source, alpha=alpha, gtau=gtau)
        except KeyError:
            raise UsageError(f"unknown builtin {source!r}; see 'qswap list'") from None
    if alpha is not None or gtau is not None:
        raise UsageError("--alpha and --gtau only apply to builtin protocols")
    if not os.path.isfile(source):
        raise UsageError(f"{source}: file not found")
    with open(source, "rb") as fh:
        raw = fh.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise UsageError(f"{source}: not UTF-8 ({exc.reason} at byte {exc.start})") from None
    try:
        return parse(text)
    except QspSyntaxError as exc:
        raise UsageError("\n".join(f"{source}:{e}" for e in exc.errors)) from None


def _write(text: str, path: str | None):
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    try:
        protocol = load_protocol(args.protocol, args.alpha, args.gtau)
        t0 = time.perf_counter()
        report = run(protocol, cutoff=args.cutoff)
        elapsed = time.perf_counter() - t0
    except UsageError as exc:
        return _err(str(exc))
    except (ProtocolError, HilbertError, ValueError) as exc:
        return _err(f"engine error: {exc}")
    doc = build_document(report, elapsed if args.timing else None)
    _write(FORMATTERS[args.format](doc), args.output)
    return EXIT_OK if report.passed else EXIT_FAILED


def parse_range(text: str) -> list[float]:
    """``start:stop:step`` with an inclusive stop."""
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"range must be start:stop:step, got {text!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise UsageError(f"range must be numeric, got {text!r}") from None
    if not all(math.isfinite(v) for v in (start, stop, step)):
        raise UsageError("range bounds must be finite")
    if step <= 0:
        raise UsageError("step must be > 0")
    if stop < start:
        raise UsageError(f"empty range {text!r}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [start + k * step for k in range(count)]


def sweep_point(name: str, param: str, value: float, alpha=None, cutoff=None):
    """(success probability, worst conditional Bell fidelity) at one grid point."""
    kw = {"alpha": value} if param == "alpha" else {"alpha": alpha, "gtau": value}
    report = run(library.get_builtin(name, **kw), cutoff=cutoff)
    fids = [a.value for a in report.assertions if a.kind == "fidelity" and a.value is not None]
    return report.success_probability, (min(fids) if fids else float("nan"))


def cmd_sweep(args) -> int:
    name = args.name.removeprefix("builtin:")
    if name not in library.BUILTINS:
        return _err(f"unknown builtin {args.name!r}; see 'qswap list'")
    try:
        grid = parse_range(args.range)
    except UsageError as exc:
        return _err(str(exc))
    rows = []
    for v in grid:
        try:
            success, fid = sweep_point(name, args.param, v, args.alpha, args.cutoff)
        except (ProtocolError, HilbertError, ValueError) as exc:
            return _err(f"engine error at {args.param}={v!r}: {exc}")
        rows.append((repr(v), repr(success), repr(fid)))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    w.writerows(rows)
    _write(buf.getvalue(), args.output)
    return EXIT_OK


def cmd_verify(args) -> int:
    selected = checks.select(args.filter)
    if not selected:
        return _err(f"no checks match {args.filter!r}")
    results = checks.run_checks(selected)
    width = max(len(c.name) for c, _, _ in results)
    for c, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {c.name:<{width}}  {detail}")
    failed = sum(not ok for _, ok, _ in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_FAILED if failed else EXIT_OK


def cmd_list(args) -> int:
    for name in library.builtin_names():
        print(f"builtin:{name}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qswap", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"qswap {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run a .qsp file or builtin:NAME and write a report")
    r.add_argument("protocol")
    r.add_argument("--format", choices=sorted(FORMATTERS), default="json")
    r.add_argument("--alpha", type=float, help="coherent amplitude (builtins only)")
    r.add_argument("--gtau", type=float, help="resonant pulse area (builtins only)")
    r.add_argument("--cutoff", type=int, help="Fock cutoff n_max")
    r.add_argument("--seed", type=int, help="accepted for compatibility; runs are deterministic")
    r.add_argument("--timing", action="store_true", help="include wall time in the report")
    r.add_argument("-o", "--output")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="scan alpha or gtau for a builtin; CSV output")
    s.add_argument("name")
    s.add_argument("--param", choices=("alpha", "gtau"), required=True)
    s.add_argument("--range", required=True, metavar="START:STOP:STEP")
    s.add_argument("--alpha", type=float, help="fixed alpha for gtau sweeps")
    s.add_argument("--cutoff", type=int)
    s.add_argument("--seed", type=int, help="accepted for compatibility; runs are deterministic")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="run invariant and oracle checks")
    v.add_argument("--filter", help="only checks whose name or group contains this text")
    v.set_defaults(func=cmd_verify)

    ls = sub.add_parser("list", help="list builtin protocols")
    ls.set_defaults(func=cmd_list)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
