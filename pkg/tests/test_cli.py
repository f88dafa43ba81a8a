import io
import subprocess
import sys

import pytest

from minibmc.cli import EXIT_ERROR, EXIT_FAILED, EXIT_OK, main
from minibmc.satcore import parse_dimacs
from util import DATA, PROGRAMS

STRING_UTIL = str(PROGRAMS / "StringUtil.mjb")
SEARCH = str(PROGRAMS / "BinarySearch.mjb")


def cli(*argv) -> tuple[int, str]:
    out = io.StringIO()
    code = main(list(argv), out)
    return code, out.getvalue()


def test_failure_exit_code_and_report():
    code, out = cli("StringUtil.getLastToken", "--path", STRING_UTIL, "--unwind", "2",
                    "--max-nondet-string-length", "8")
    assert code == EXIT_FAILED
    assert "[StringUtil.getLastToken.assertion.1]" in out
    assert "assertion at file StringUtil.mjb line 17" in out
    assert out.rstrip().endswith("VERIFICATION FAILED")


def test_success_exit_code():
    code, out = cli("EquivalenceCheck.check", "--path", str(PROGRAMS / "SignalUtil.mjb"),
                    "--path", str(PROGRAMS / "EquivalenceCheck.mjb"))
    assert code == EXIT_OK
    assert out.rstrip().endswith("VERIFICATION SUCCESSFUL")


def test_trace_flag():
    code, out = cli("BinarySearch.binarySearch", "--path", SEARCH, "--unwind", "2",
                    "--throw-runtime-exceptions", "--trace")
    assert code == EXIT_FAILED
    assert "Trace for BinarySearch.binarySearch.no-uncaught-exception.1:" in out
    assert 'dynamic_object2.@class_identifier="NullPointerException"' in out
    assert "INPUT array: null" in out


def test_output_is_deterministic():
    argv = ("StringUtil.getLastToken", "--path", STRING_UTIL, "--unwind", "2",
            "--max-nondet-string-length", "8", "--trace")
    assert cli(*argv) == cli(*argv)


@pytest.mark.parametrize("argv", [
    ("StringUtil.getLastToken",),
    ("StringUtil.getLastToken", "--path", "/no/such/file.mjb"),
    ("StringUtil.nope", "--path", STRING_UTIL),
    ("StringUtil.getLastToken", "--path", STRING_UTIL, "--unwind", "0"),
    ("StringUtil.getLastToken", "--path", STRING_UTIL, "--bogus"),
    ("strings", str(DATA / "missing.sc")),
    ("run", "StringUtil.getLastToken", "--path", STRING_UTIL, "--feed", "1,2,3"),
    ("run", "StringUtil.getLastToken", "--path", STRING_UTIL, "--feed", "[oops"),
])
def test_usage_errors(argv, capsys):
    assert main(list(argv), io.StringIO()) == EXIT_ERROR
    assert capsys.readouterr().err.startswith("error:")


def test_syntax_error_is_reported(tmp_path, capsys):
    bad = tmp_path / "Bad.mjb"
    bad.write_text("class A {\n  method f( }")
    assert main(["A.f", "--path", str(bad)], io.StringIO()) == EXIT_ERROR
    assert "Bad.mjb" in capsys.readouterr().err


def test_show_goto_and_vcc():
    code, out = cli("BinarySearch.binarySearch", "--path", SEARCH, "--show-goto")
    assert code == EXIT_OK and "BinarySearch.binarySearch" in out and "GOTO" in out
    code, out = cli("BinarySearch.binarySearch", "--path", SEARCH, "--show-vcc")
    assert code == EXIT_OK and "#" in out


def test_dimacs_export_round_trips(tmp_path):
    target = tmp_path / "vc.cnf"
    code, _ = cli("StringUtil.getLastToken", "--path", STRING_UTIL, "--unwind", "2",
                  "--max-nondet-string-length", "4", "--dimacs", str(target))
    assert code == EXIT_FAILED
    n, clauses = parse_dimacs(target.read_text())
    assert n > 0 and clauses
    code, out = cli("sat", str(target))
    assert code == EXIT_OK and out.startswith("SAT\nv ")


def test_sat_subcommand(tmp_path):
    f = tmp_path / "u.cnf"
    f.write_text("p cnf 1 2\n1 0\n-1 0\n")
    assert cli("sat", str(f)) == (EXIT_OK, "UNSAT\n")
    f.write_text("p cnf 2 1\n1 -2 0\n")
    code, out = cli("sat", str(f))
    assert code == EXIT_OK and out.startswith("SAT\nv ") and out.rstrip().endswith(" 0")


def test_strings_subcommand():
    code, out = cli("strings", str(DATA / "substring.sc"))
    assert code == EXIT_OK and out.startswith("SAT\n")


def test_run_subcommand():
    code, out = cli("run", "StringUtil.getLastToken", "--path", STRING_UTIL, "--feed", '"a,b",44,2')
    assert (code, out) == (EXIT_OK, 'returned "b"\n')
    code, out = cli("run", "StringUtil.getLastToken", "--path", STRING_UTIL, "--feed", '"a,b",44,0')
    assert code == EXIT_FAILED
    assert out == "violated StringUtil.getLastToken.assertion.1 at line 17\n"


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "minibmc", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "--unwind" in proc.stdout
