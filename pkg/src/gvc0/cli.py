"""Command-line driver.

Exit codes:
  0  verified (with or without residual checks); for `run`, the entry returned
  1  static verification failure
  2  rejected declaration or ill-formed input (parse, type, purity, admissibility,
     unreadable file, bad --entry/--args)
  3  solver or internal error, or an unwritable output path
  4  `run` only: a residual run-time check failed
  5  `run` only: run-time error (null dereference, division by zero) or budget exceeded
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from typing import Optional, Sequence

from .errors import FrontendError, InternalError
from .frontend import load
from .methods import VerificationReport, verify_program
from .report import emit_checks_json, human
from .runtime import BudgetExceeded, CheckFailure, RuntimeFault, interpret, parse_args, show
from .smt import SolverSession

EXIT_OK, EXIT_FAILURE, EXIT_REJECTED, EXIT_INTERNAL, EXIT_CHECK, EXIT_RUNTIME = range(6)

log = logging.getLogger("gvc0")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("file", help="C0 source file")
    common.add_argument("--solver", default=None,
                        help="solver command (default: $GVC0_SOLVER or 'z3 -in')")
    common.add_argument("--timeout", type=float, default=10.0,
                        help="per-query solver timeout in seconds (default 10)")
    common.add_argument("--emit-checks", metavar="PATH", help="write the JSON check report")
    common.add_argument("--dump-axioms", metavar="PATH",
                        help="write the SMT-LIB preamble, declarations and function axioms")
    common.add_argument("--jobs", type=int, default=1,
                        help="verify methods in this many parallel solver sessions")
    common.add_argument("-v", "--verbose", action="store_true",
                        help="list every check and extension")

    p = argparse.ArgumentParser(prog="gvc0", description="Gradual verifier for a C0 subset.",
                                epilog=__doc__.split("\n", 2)[2],
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("verify", parents=[common], help="verify a file")
    run = sub.add_parser("run", parents=[common],
                         help="verify, then interpret a method with residual checks enforced")
    run.add_argument("--entry", required=True, help="method to run")
    run.add_argument("--args", default="", help="comma-separated literals, e.g. 6 or true,null")
    return p


def _exit_code(r: VerificationReport) -> int:
    return {"verified": EXIT_OK, "verified-with-checks": EXIT_OK,
            "static-failure": EXIT_FAILURE, "rejected": EXIT_REJECTED}[r.verdict]


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out, err = sys.stdout, sys.stderr

    try:
        with open(args.file, encoding="utf-8") as fh:
            source = fh.read()
    except OSError as exc:
        print(f"gvc0: cannot read {args.file}: {exc.strerror or exc}", file=err)
        return EXIT_REJECTED
    try:
        tp = load(source)
    except FrontendError as exc:
        print(f"{args.file}:{exc}", file=err)
        return EXIT_REJECTED

    started = time.monotonic()
    try:
        with SolverSession(args.solver, args.timeout) as session:
            report = verify_program(tp, session, args.file, jobs=max(1, args.jobs))
    except InternalError as exc:
        print(f"gvc0: internal error: {exc}", file=err)
        return EXIT_INTERNAL
    log.info("verified %s in %.2fs", args.file, time.monotonic() - started)

    try:
        if args.emit_checks:
            emit_checks_json(report, args.emit_checks)
        if args.dump_axioms:
            _write(args.dump_axioms, report.axiom_text)
    except OSError as exc:
        print(f"gvc0: cannot write output: {exc}", file=err)
        return EXIT_INTERNAL

    out.write(human(report, args.verbose))
    code = _exit_code(report)
    if args.command == "verify" or code != EXIT_OK:
        return code

    m = tp.methods.get(args.entry)
    if m is None:
        print(f"gvc0: no method named {args.entry}", file=err)
        return EXIT_REJECTED
    try:
        values = parse_args(args.args, [p.type for p in m.params])
    except ValueError as exc:
        print(f"gvc0: bad --args: {exc}", file=err)
        return EXIT_REJECTED
    try:
        result, it = interpret(tp, report, args.entry, values)
    except CheckFailure as exc:
        print(f"{args.file}:{exc}", file=err)
        print(f"  environment: {exc.env}", file=err)
        print(f"  call stack: {' > '.join(exc.stack)}", file=err)
        return EXIT_CHECK
    except (RuntimeFault, BudgetExceeded) as exc:
        print(f"{args.file}:{exc}", file=err)
        return EXIT_RUNTIME
    except RecursionError:
        print(f"{args.file}: budget exceeded: host recursion limit", file=err)
        return EXIT_RUNTIME
    print(f"{args.entry}({args.args}) = {show(result)} "
          f"[{it.stats.checks_evaluated} checks evaluated]", file=out)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
