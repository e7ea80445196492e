import functools

import pytest

from gvc0 import SolverSession, corpus, load, verify_program


def verify_source(src: str, name: str = "<test>"):
    tp = load(src)
    with SolverSession() as s:
        return tp, verify_program(tp, s, name)


@functools.cache
def corpus_report(name: str):
    return verify_source(corpus.source(name), f"{name}.c0")


@pytest.fixture
def session():
    with SolverSession() as s:
        yield s


# ---------------------------------------------------------------------------
# One PASS/FAIL line per acceptance criterion

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number n")


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    n, title = marker
    failed = report.failed or (report.when == "call" and report.skipped)
    if report.when == "call" or failed:
        _criteria[n] = (title, "FAIL" if failed else "PASS")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    m = item.get_closest_marker("criterion")
    if m is not None:
        outcome.get_result().criterion = tuple(m.args)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        title, status = _criteria[n]
        terminalreporter.write_line(f"criterion {n:2d} {status}  {title}")
