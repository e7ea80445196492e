"""Bundled example programs."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

# programs whose every declaration verifies (possibly with residual checks)
VERIFYING = [
    "factorial", "imprecise_factorial", "double", "double_precise", "fib", "sum", "power",
    "maxabs", "cell", "list",
]
# a precise mutant paired with its imprecise counterpart
MUTANTS = {"factorial_bug": "static", "imprecise_factorial_bug": "dynamic"}
REJECTED = ["reject_list", "reject_self"]


def names() -> list[str]:
    return sorted(p.name[:-3] for p in resources.files(__name__).iterdir()
                  if p.name.endswith(".c0"))


def path(name: str) -> Path:
    return Path(str(resources.files(__name__) / f"{name}.c0"))


def source(name: str) -> str:
    return path(name).read_text(encoding="utf-8")
