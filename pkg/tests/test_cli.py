import json
import subprocess
import sys

import jsonschema
import pytest

from gvc0 import corpus
from gvc0.cli import main
from gvc0.report import REPORT_SCHEMA
from gvc0.smt import PREAMBLE


def cli(*argv):
    return main([str(a) for a in argv])


@pytest.mark.parametrize("name, code", [
    ("factorial", 0), ("imprecise_factorial", 0), ("double", 0),
    ("factorial_bug", 1), ("imprecise_post", 1),
    ("reject_list", 2), ("reject_self", 2),
])
def test_verify_exit_codes(name, code, capsys):
    assert cli("verify", corpus.path(name)) == code
    out = capsys.readouterr().out
    assert out.splitlines()[-1].startswith(("verified", "static-failure", "rejected"))


def test_rejection_diagnostic_is_reported(capsys):
    cli("verify", corpus.path("reject_list"))
    out = capsys.readouterr().out
    assert "reject_list.c0:" in out and "equi-recursive" in out


def test_parse_errors_exit_2(tmp_path, capsys):
    p = tmp_path / "bad.c0"
    p.write_text("int f( {")
    assert cli("verify", p) == 2
    assert capsys.readouterr().err.startswith(f"{p}:1:")


def test_unreadable_file_exits_2(tmp_path):
    assert cli("verify", tmp_path / "missing.c0") == 2


def test_unwritable_output_exits_3(tmp_path):
    target = tmp_path / "no" / "such" / "dir" / "out.json"
    assert cli("verify", corpus.path("factorial"), "--emit-checks", target) == 3


def test_missing_solver_exits_3():
    assert cli("verify", corpus.path("factorial"), "--solver", "/nonexistent/solver") == 3


def test_emitted_json_matches_schema(tmp_path):
    out = tmp_path / "r.json"
    assert cli("verify", corpus.path("double"), "--emit-checks", out) == 0
    doc = json.loads(out.read_text())
    jsonschema.validate(doc, REPORT_SCHEMA)
    client = next(d for d in doc["declarations"] if d["name"] == "imprecise_client")
    assert [(c["condition"], c["guards"]) for c in client["checks"]] == [
        ("acc(y->val)", []), ("acc(x->val)", ["b"])]
    assert client["checks"][0]["origin"] == {"callee": "double", "callSite": {"line": 16, "col": 11}}
    fn = next(d for d in doc["declarations"] if d["name"] == "double")
    assert fn["extensions"] == [{"function": "double", "access": "x->val", "guard": "b"}]


@pytest.mark.parametrize("name", corpus.names())
def test_every_corpus_report_matches_schema(name, tmp_path):
    out = tmp_path / "r.json"
    cli("verify", corpus.path(name), "--emit-checks", out)
    jsonschema.validate(json.loads(out.read_text()), REPORT_SCHEMA)


def test_dump_axioms(tmp_path):
    out = tmp_path / "ax.smt2"
    assert cli("verify", corpus.path("factorial"), "--dump-axioms", out) == 0
    text = out.read_text()
    assert text.startswith(PREAMBLE)
    for qid in ("pureFactorial%A1", "pureFactorial%A2", "pureFactorial%A3"):
        assert f":qid {qid}" in text


def test_verbose_lists_checks(capsys):
    cli("verify", "-v", corpus.path("double"))
    out = capsys.readouterr().out
    assert "double: extended with acc(x->val) when b" in out
    assert "imprecise_client: 16:11 pre acc(x->val) when b (call to double)" in out


@pytest.mark.parametrize("name, args, code, value", [
    ("imprecise_factorial", "6", 0, "720"),
    ("factorial", "6", 0, "720"),
    ("imprecise_factorial_bug", "6", 4, None),
    ("factorial_bug", "6", 1, None),
])
def test_run(name, args, code, value, capsys):
    assert cli("run", corpus.path(name), "--entry", "iterativeFactorial", "--args", args) == code
    if value is not None:
        assert capsys.readouterr().out.splitlines()[-1].startswith(f"iterativeFactorial({args}) = {value}")


def test_run_check_failure_reports_context(capsys):
    cli("run", corpus.path("imprecise_factorial_bug"), "--entry", "iterativeFactorial", "--args", "6")
    err = capsys.readouterr().err
    assert "\\result == pureFactorial(n)" in err and "environment:" in err
    assert "call stack: iterativeFactorial" in err


def test_run_fault_exits_5(tmp_path):
    p = tmp_path / "q.c0"
    p.write_text("int q(int a)\n  //@ requires ?;\n  //@ ensures ?;\n{ return 1 / a; }\n")
    assert cli("run", p, "--entry", "q", "--args", "0") == 5


@pytest.mark.parametrize("extra", [["--entry", "nope"], ["--entry", "iterativeFactorial", "--args", "x"]])
def test_run_bad_entry_or_args_exit_2(extra):
    assert cli("run", corpus.path("factorial"), *extra) == 2


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "gvc0", "verify", str(corpus.path("factorial"))],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.splitlines()[-1] == "verified, 0 residual checks"
