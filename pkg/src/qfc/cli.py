"""Command-line entry point ``qfc``.

Exit codes: 0 success, 1 failed self-check, 2 config error,
3 optimization failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys

from qfc.config import load_config
from qfc.errors import ConfigError, OptimizationError, OutputError, QfcError
from qfc.experiments import compare_families, emit_csv, format_csv, run_scenario

log = logging.getLogger("qfc")

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_OPT, EXIT_IO = 0, 1, 2, 3, 4


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qfc",
                                 description="Coherent vs measurement-based feedback sweeps.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, hlp in (("run", "optimise every family over the occupancy grid, emit CSV"),
                      ("compare", "side-by-side ratios and the coherent advantage")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("--config", required=True, help="JSON scenario file")
        p.add_argument("--out", help="CSV path for the sweep (default: stdout for run)")
        p.add_argument("--seed", type=_u64)
        p.add_argument("--restarts", type=_positive)
    sub.add_parser("check", help="compare the numerics against closed forms")
    return ap


def _write(result, out) -> None:
    if out is None:
        sys.stdout.write(format_csv(result))
    else:
        emit_csv(result, out)
        log.info("wrote %d rows to %s", len(result.rows), out)


def _cmd_run(args) -> int:
    scenario = load_config(args.config, args.seed, args.restarts)
    _write(run_scenario(scenario), args.out)
    return EXIT_OK


def _cmd_compare(args) -> int:
    scenario = load_config(args.config, args.seed, args.restarts)
    cmp = compare_families(scenario)
    if args.out is not None:
        emit_csv(cmp.result, args.out)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(("kn",) + cmp.families + ("advantage",))
    for row in cmp.table():
        w.writerow(["%.17g" % row[k] for k in ("kn",) + cmp.families + ("advantage",)])
    return EXIT_OK


def _cmd_check(args) -> int:
    from qfc.oracles import run_checks

    ok = True
    for name, passed, err in run_checks():
        print(f"{'PASS' if passed else 'FAIL'}  {name:<20s} worst error {err:.3g}")
        ok &= passed
    return EXIT_OK if ok else EXIT_CHECK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": _cmd_run, "compare": _cmd_compare, "check": _cmd_check}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"qfc: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OptimizationError as exc:
        print(f"qfc: optimization failed: {exc}", file=sys.stderr)
        return EXIT_OPT
    except (OutputError, OSError) as exc:
        print(f"qfc: {exc}", file=sys.stderr)
        return EXIT_IO
    except QfcError as exc:
        print(f"qfc: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
