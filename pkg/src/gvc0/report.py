"""Check reports: JSON (the machine contract) and a human summary table."""

from __future__ import annotations

import json
from typing import Any

from .methods import DeclReport, VerificationReport
from .state import RuntimeCheck

_LOC = {
    "type": "object",
    "properties": {"line": {"type": "integer"}, "col": {"type": "integer"}},
    "required": ["line", "col"],
    "additionalProperties": False,
}

REPORT_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["file", "verdict", "declarations"],
    "additionalProperties": False,
    "properties": {
        "file": {"type": "string"},
        "verdict": {"enum": ["verified", "verified-with-checks", "static-failure", "rejected"]},
        "declarations": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "verdict", "checks", "extensions", "diagnostics"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string"},
                    "verdict": {"enum": ["verified", "verified-with-checks",
                                         "static-failure", "rejected"]},
                    "checks": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["location", "kind", "condition", "guards", "origin"],
                            "additionalProperties": False,
                            "properties": {
                                "location": _LOC,
                                "kind": {"enum": ["field-access", "assert", "pre", "post",
                                                  "invariant", "predicate"]},
                                "condition": {"type": "string"},
                                "guards": {"type": "array", "items": {"type": "string"}},
                                "origin": {
                                    "oneOf": [
                                        {"type": "null"},
                                        {"type": "object",
                                         "required": ["callee", "callSite"],
                                         "additionalProperties": False,
                                         "properties": {"callee": {"type": "string"},
                                                        "callSite": _LOC}},
                                    ]
                                },
                            },
                        },
                    },
                    "extensions": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["function", "access", "guard"],
                            "additionalProperties": False,
                            "properties": {"function": {"type": "string"},
                                           "access": {"type": "string"},
                                           "guard": {"type": "string"}},
                        },
                    },
                    "diagnostics": {"type": "array", "items": {"type": "string"}},
                },
            },
        },
    },
}


def _loc(loc) -> dict[str, int]:
    return {"line": loc[0], "col": loc[1]}


def check_json(c: RuntimeCheck) -> dict[str, Any]:
    origin = None
    if c.origin is not None:
        origin = {"callee": c.origin.callee, "callSite": _loc(c.origin.call_site)}
    return {
        "location": _loc(c.loc),
        "kind": c.kind,
        "condition": c.text,
        "guards": c.guard_texts,
        "origin": origin,
    }


def declaration_json(d: DeclReport) -> dict[str, Any]:
    return {
        "name": d.name,
        "verdict": d.verdict,
        "checks": [check_json(c) for c in d.checks],
        "extensions": [{"function": e.function, "access": e.access, "guard": e.guard}
                       for e in d.extensions],
        "diagnostics": list(d.diagnostics),
    }


def report_json(r: VerificationReport) -> dict[str, Any]:
    return {
        "file": r.file,
        "verdict": r.verdict,
        "declarations": [declaration_json(d) for d in r.declarations],
    }


def dumps(r: VerificationReport) -> str:
    return json.dumps(report_json(r), indent=2) + "\n"


def emit_checks_json(r: VerificationReport, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(r))


def summary_line(r: VerificationReport) -> str:
    n = len(r.all_checks)
    return f"{r.verdict}, {n} residual check{'' if n == 1 else 's'}"


def human(r: VerificationReport, verbose: bool = False) -> str:
    rows = [("declaration", "kind", "verdict", "checks", "extensions")]
    for d in r.declarations:
        rows.append((d.name, d.kind, d.verdict, str(len(d.checks)), str(len(d.extensions))))
    widths = [max(len(row[i]) for row in rows) for i in range(5)]
    lines = []
    for i, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    for d in r.declarations:
        for msg in d.diagnostics:
            lines.append(f"{r.file}:{msg}")
        if verbose:
            for e in d.extensions:
                lines.append(f"  {d.name}: extended with acc({e.access}) when {e.guard}")
            for c in d.checks:
                guard = f" when {' && '.join(c.guard_texts)}" if c.guards else ""
                via = f" (call to {c.origin.callee})" if c.origin else ""
                lines.append(f"  {d.name}: {c.loc[0]}:{c.loc[1]} {c.kind} {c.text}{guard}{via}")
    lines.append(summary_line(r))
    return "\n".join(lines) + "\n"
