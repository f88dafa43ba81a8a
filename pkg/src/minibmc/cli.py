"""Command line driver.

    minibmc Class.method --path prog.mjb [--unwind K] [--trace] ...
    minibmc sat file.cnf
    minibmc strings file.sc
    minibmc run Class.method --path prog.mjb --feed 1,"ab",null
"""

from __future__ import annotations

import argparse
import json
import sys

from .frontend import MJBError, parse_modules, resolve_entry
from .options import Options

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FAILED = 10


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _verify_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="minibmc", description="Bounded model checker for MJB programs.")
    p.add_argument("entry", help="entry method, Class.method (Class alone means Class.main)")
    p.add_argument("--path", action="append", default=[], help="MJB source file (repeatable)")
    p.add_argument("--unwind", type=int, default=1, help="loop and recursion bound k (default 1)")
    p.add_argument("--trace", action="store_true", help="print a counterexample for each failure")
    p.add_argument("--throw-runtime-exceptions", action="store_true",
                   help="runtime errors throw exception objects instead of failing checks")
    p.add_argument("--max-nondet-string-length", type=int, default=64)
    p.add_argument("--max-array-length", type=int, default=16)
    p.add_argument("--check-overflow", action="store_true", help="check signed arithmetic overflow")
    p.add_argument("--unwinding-assertions", action="store_true",
                   help="report loops that can run past the bound instead of pruning them")
    p.add_argument("--show-goto", action="store_true", help="print the lowered GOTO program")
    p.add_argument("--show-vcc", action="store_true", help="print the verification conditions")
    p.add_argument("--show-string-axioms", action="store_true",
                   help="print string axioms and index sets after solving")
    p.add_argument("--dimacs", metavar="FILE", help="write the CNF of the VC to FILE")
    return p


def _load(paths: list[str]):
    if not paths:
        raise UsageError("no --path given")
    sources = []
    for p in paths:
        try:
            with open(p, encoding="utf-8") as fh:
                sources.append((fh.read(), p.rsplit("/", 1)[-1]))
        except OSError as e:
            raise UsageError(f"cannot read {p}: {e.strerror}") from None
    return parse_modules(sources)


def _options(a) -> Options:
    if a.unwind < 1:
        raise UsageError("--unwind must be at least 1")
    if a.max_nondet_string_length < 0 or a.max_array_length < 0:
        raise UsageError("lengths must be non-negative")
    return Options(unwind=a.unwind, throw_runtime=a.throw_runtime_exceptions,
                   check_overflow=a.check_overflow, unwinding_assertions=a.unwinding_assertions,
                   max_nondet_string_length=a.max_nondet_string_length,
                   max_array_length=a.max_array_length)


def cmd_verify(argv: list[str], out) -> int:
    from .gotoc import GotoOptions, build_goto, show_goto
    from .symex import show_vcc, unwind
    from .verify import dimacs, format_results, verify

    a = _verify_parser().parse_args(argv)
    opts = _options(a)
    model = _load(a.path)
    entry = resolve_entry(model, a.entry)
    if a.show_goto or a.show_vcc:
        prog = build_goto(model, entry, GotoOptions(opts.throw_runtime, opts.check_overflow))
        if a.show_goto:
            print(show_goto(prog), file=out)
        if a.show_vcc:
            print(show_vcc(unwind(prog, opts)), file=out)
        return EXIT_OK
    if a.dimacs:
        text = dimacs(model, entry, opts)
        try:
            with open(a.dimacs, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as e:
            raise UsageError(f"cannot write {a.dimacs}: {e.strerror}") from None
    ver = verify(model, entry, opts, traces=a.trace)
    print(format_results(ver), file=out)
    if a.trace:
        for r in ver.results:
            if r.failed:
                print(f"\nTrace for {r.info.pid}:\n", file=out)
                print(r.trace.render(), file=out)
    if a.show_string_axioms:
        print("\nString axioms:", file=out)
        print(ver.system.show(), file=out)
    print("\nVERIFICATION FAILED" if ver.failed else "\nVERIFICATION SUCCESSFUL", file=out)
    return EXIT_FAILED if ver.failed else EXIT_OK


def cmd_sat(argv: list[str], out) -> int:
    from .satcore import Solver, SolverError, parse_dimacs

    p = _Parser(prog="minibmc sat", description="Decide a DIMACS CNF file.")
    p.add_argument("file")
    a = p.parse_args(argv)
    try:
        with open(a.file, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise UsageError(f"cannot read {a.file}: {e.strerror}") from None
    try:
        n, clauses = parse_dimacs(text)
    except SolverError as e:
        raise UsageError(str(e)) from None
    s = Solver(n)
    for c in clauses:
        s.add_clause(c)
    if s.solve():
        print("SAT", file=out)
        print("v " + " ".join(map(str, s.model_lits()[:n])) + " 0", file=out)
    else:
        print("UNSAT", file=out)
    return EXIT_OK


def cmd_strings(argv: list[str], out) -> int:
    from .strsolve import StringSolverError, format_result, solve_sc

    p = _Parser(prog="minibmc strings", description="Solve a string constraint file.")
    p.add_argument("file")
    p.add_argument("--max-string-length", type=int, default=16)
    p.add_argument("--show-string-axioms", action="store_true")
    a = p.parse_args(argv)
    try:
        with open(a.file, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise UsageError(f"cannot read {a.file}: {e.strerror}") from None
    try:
        res = solve_sc(text, a.max_string_length)
    except StringSolverError as e:
        raise UsageError(str(e)) from None
    print(format_result(res), file=out)
    if a.show_string_axioms:
        print(res.system.show(), file=out)
    return EXIT_OK


def parse_feed(text: str) -> list:
    """Comma-separated JSON values: 3, "ab", null, true, [1, 2]."""
    try:
        return json.loads(f"[{text}]") if text.strip() else []
    except json.JSONDecodeError as e:
        raise UsageError(f"bad --feed: {e.msg}") from None


def cmd_run(argv: list[str], out) -> int:
    from .interp import FeedError, run

    p = _Parser(prog="minibmc run", description="Run a method in the concrete interpreter.")
    p.add_argument("entry")
    p.add_argument("--path", action="append", default=[])
    p.add_argument("--feed", default="", help="parameters (except this), then nondet values")
    p.add_argument("--unwind", type=int, default=1_000_000)
    p.add_argument("--fuel", type=int, default=1_000_000)
    p.add_argument("--throw-runtime-exceptions", action="store_true")
    p.add_argument("--check-overflow", action="store_true")
    p.add_argument("--max-nondet-string-length", type=int, default=64)
    p.add_argument("--max-array-length", type=int, default=16)
    a = p.parse_args(argv)
    model = _load(a.path)
    entry = resolve_entry(model, a.entry)
    opts = Options(unwind=a.unwind, throw_runtime=a.throw_runtime_exceptions,
                   check_overflow=a.check_overflow,
                   max_nondet_string_length=a.max_nondet_string_length,
                   max_array_length=a.max_array_length)
    try:
        o = run(model, entry, parse_feed(a.feed), a.fuel, opts)
    except FeedError as e:
        raise UsageError(str(e)) from None
    if o.kind == "returned":
        print(f"returned {json.dumps(o.value) if isinstance(o.value, str) else o.value}", file=out)
        return EXIT_OK
    if o.kind in ("violated", "uncaught"):
        what = f"uncaught {o.exc_class}" if o.kind == "uncaught" else "violated"
        print(f"{what} {o.pid} at line {o.line}", file=out)
        return EXIT_FAILED
    print(o.kind, file=out)
    return EXIT_OK


COMMANDS = {"sat": cmd_sat, "strings": cmd_strings, "run": cmd_run}


def main(argv: list[str] | None = None, out=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    out = out or sys.stdout
    try:
        if argv and argv[0] in COMMANDS:
            return COMMANDS[argv[0]](argv[1:], out)
        return cmd_verify(argv, out)
    except SystemExit as e:          # --help
        return EXIT_OK if not e.code else EXIT_ERROR
    except (UsageError, MJBError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as e:           # internal failure: still a clean exit code
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
