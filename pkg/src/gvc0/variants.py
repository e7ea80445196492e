"""Source-level program variants: imprecising one specification clause."""

from __future__ import annotations

import copy
from typing import Iterator

from .funcs import recursive_predicates
from .frontend import TypedProgram
from .printer import program_str
from .syntax import FunctionDecl, GradualFormula, MethodDecl, PredInst, Program, While, walk


def clauses(prog: Program) -> Iterator[tuple[str, GradualFormula]]:
    """Every requires / ensures / loop_invariant clause, labelled."""
    for d in prog.decls:
        if isinstance(d, (FunctionDecl, MethodDecl)):
            for i, c in enumerate(d.requires):
                yield f"{d.name}:requires#{i}", c
            for i, c in enumerate(d.ensures):
                yield f"{d.name}:ensures#{i}", c
        if isinstance(d, MethodDecl):
            loops = [n for n in walk(d.body) if isinstance(n, While)]
            for k, w in enumerate(loops):
                for i, c in enumerate(w.invariants):
                    yield f"{d.name}:loop{k}:invariant#{i}", c


def _admissible(label: str, clause: GradualFormula, tp: TypedProgram) -> bool:
    # an imprecise function precondition may not reach a recursive predicate
    name, kind = label.split(":")[0], label.split(":")[1]
    if name in tp.functions and kind.startswith("requires"):
        rec = recursive_predicates(tp)
        return not any(isinstance(n, PredInst) and n.name in rec for n in walk(clause))
    return True


def imprecise_variants(tp: TypedProgram) -> Iterator[tuple[str, str]]:
    """(label, source) for each precise clause turned into `? && clause`."""
    labels = [(lbl, c) for lbl, c in clauses(tp.program)]
    for idx, (label, clause) in enumerate(labels):
        if clause.imprecise or not _admissible(label, clause, tp):
            continue
        prog = copy.deepcopy(tp.program)
        _, target = list(clauses(prog))[idx]
        target.imprecise = True
        yield label, program_str(prog)
