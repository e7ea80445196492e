"""Walk through how an imprecise pure function grows its precondition.

`double` only asks for acc(y->val) but reads x->val when b holds.  The
verifier extends the precondition with a guarded permission, records where
the new chunk sits in the snapshot, and hands the obligation to callers as
run-time checks.
"""

from gvc0 import SolverSession, corpus, load, verify_program
from gvc0.printer import gradual_str
from gvc0.runtime import ConcreteHeap, eval_pure_concrete

tp = load(corpus.source("double"))
with SolverSession() as session:
    report = verify_program(tp, session, "double.c0")

info = report.functions["double"]
print("declared precondition:", gradual_str(tp.functions["double"].pre))
print("extended precondition:", gradual_str(info.extended_pre))
for m in info.snapshot_map:
    print(f"  snapshot slot {'/'.join(m.path)}: {m.location} ({m.origin})")

print("\nfunction axioms:")
for ax in info.axioms:
    print(" ", ax.text)

print("\nchecks left for the imprecise caller:")
for c in report.entry("imprecise_client").checks:
    guard = " && ".join(c.guard_texts) or "always"
    print(f"  {c.loc[0]}:{c.loc[1]} {c.text} when {guard} (call to {c.origin.callee})")

heap = ConcreteHeap()
x, y = heap.alloc({"val": 3}), heap.alloc({"val": 9})
print("\ndouble(true, x, y, x) with x->val = 3:", eval_pure_concrete(tp, "double", [True, x, y, x], heap))
