"""Static and dynamic halves of gradual verification on iterative factorial.

The precise program proves outright.  Making the contracts imprecise leaves
two residual checks, which the interpreter enforces; an off-by-one loop bound
then slips past the static pass but is caught when run.
"""

from gvc0 import CheckFailure, SolverSession, corpus, interpret, load, verify_program
from gvc0.report import summary_line


def verify(name):
    tp = load(corpus.source(name))
    with SolverSession() as session:
        return tp, verify_program(tp, session, f"{name}.c0")


for name in ("factorial", "imprecise_factorial", "factorial_bug", "imprecise_factorial_bug"):
    tp, report = verify(name)
    print(f"{name:24s} {summary_line(report)}")
    for d in report.declarations:
        for msg in d.diagnostics:
            print(f"{'':24s} {msg}")
    if report.verdict == "static-failure":
        continue
    try:
        value, it = interpret(tp, report, "iterativeFactorial", [6])
        print(f"{'':24s} iterativeFactorial(6) = {value}, {it.stats.checks_evaluated} checks evaluated")
    except CheckFailure as exc:
        print(f"{'':24s} {exc}")
