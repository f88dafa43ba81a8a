import itertools
import random

import pytest

from gotorun import run_goto
from minibmc import expr as E
from minibmc.frontend import parse_module
from minibmc.gotoc import (Call, ConversionError, Goto, GotoOptions, Throw, VCall, build_goto,
                           convert, dispatch_order, lower_virtual, show_goto)
from minibmc.interp import run
from minibmc.options import Options
from proggen import random_program
from util import load

ARITH = """class T {
  static method f() : int locals 1 (x) {
    const 1
    const 2
    add
    store 0
    load 0
    const 3
    if_lt small
    const 7
    return
   small:
    load 0
    return
  }
}
"""

ARITH_GOTO = """\
T.f /*  */
     0: ASSIGN $stack0i := 1  // line 3
     1: ASSIGN $stack1i := 2  // line 4
     2: ASSIGN $stack0i := ($stack0i + $stack1i)  // line 5
     3: ASSIGN x := $stack0i  // line 6
     4: ASSIGN $stack0i := x  // line 7
     5: ASSIGN $stack1i := 3  // line 8
     6: IF ($stack0i < $stack1i) THEN GOTO 9  // line 9
     7: ASSIGN $stack0i := 7  // line 10
     8: RETURN $stack0i  // line 11
     9: ASSIGN $stack0i := x  // line 13
    10: RETURN $stack0i  // line 14
    11: SKIP  // line 14
"""

DISPATCH = """class A { method m() : int locals 1 {
    const 1
    return
  } }
class B extends A { }
class C extends A { method m() : int locals 1 {
    const 3
    return
  } }
class Main {
  static method main(int) : int locals 2 (k, o) {
    load 0
    const 0
    if_eq mkA
    load 0
    const 1
    if_eq mkB
    new C
    store 1
    goto call
   mkA:
    new A
    store 1
    goto call
   mkB:
    new B
    store 1
   call:
    load 1
    invokevirtual A.m
    return
  }
}
"""

EXCEPTIONS = """class Oops extends RuntimeException { }
class Sub extends Oops { }
class X {
  static method thrower(int) : int locals 1 {
    load 0
    const 0
    if_eq t
    const 5
    return
   t:
    new Sub
    athrow
  }
  static method main(int) : int locals 1 {
   s:
    load 0
    invokestatic X.thrower
   e:
    return
   h:
    pop
    const -1
    return
  } catch (s, e) -> h : CAUGHT
}
"""

DIV = """class D {
  static method f(int, int) : int locals 2 {
    load 0
    load 1
    div
    return
  }
}
"""


def outcome(o):
    """Interpreter outcome in the executor's terms."""
    if o.violated:
        return ("violated", o.pid)
    return (o.kind, None)


def same_outcomes(model, entry, feeds, throw_runtime=False):
    prog = build_goto(model, entry, GotoOptions(throw_runtime=throw_runtime))
    opts = Options(unwind=10**6, throw_runtime=throw_runtime, max_nondet_string_length=16)
    results = []
    for feed in feeds:
        want = run(model, entry, list(feed), 50_000, opts)
        got = run_goto(prog, list(feed), 200_000)
        if want.kind == "fuel_exhausted" or got[0] == "fuel_exhausted":
            continue
        assert (got[0], got[1] if got[0] == "violated" else None) == outcome(want), feed
        results.append(want)
    return results


def test_stack_code_becomes_register_code():
    m = parse_module(ARITH, "T.mjb")
    prog = build_goto(m, m.cls("T").method("f"))
    text = show_goto(prog)
    assert text.split("\n\n", 1)[1] == ARITH_GOTO


def test_lowered_programs_have_no_virtual_calls_or_throws():
    for text, opts in ((DISPATCH, GotoOptions()), (EXCEPTIONS.replace("CAUGHT", "Oops"),
                                                   GotoOptions(throw_runtime=True))):
        m = parse_module(text)
        entry = m.cls(m.user_classes[-1].name).method("main")
        prog = build_goto(m, entry, opts)
        for fn in prog.functions.values():
            assert not any(isinstance(i, (VCall, Throw)) for i in fn.body)


def test_dispatch_cascade():
    m = parse_module(DISPATCH)
    assert dispatch_order(m, "A") == ["B", "C", "A"]
    prog = lower_virtual(convert(m), m)
    calls = [i.func for i in prog.functions["Main.main"].body if isinstance(i, Call)]
    # B inherits A.m; C overrides it
    assert calls == ["A.m", "C.m", "A.m"]
    res = same_outcomes(m, m.cls("Main").method("main"), [[0], [1], [2]])
    assert [r.value for r in res] == [1, 1, 3]


def test_single_class_dispatch():
    m = parse_module("class A { method m() locals 1 {\n return\n } }\n"
                     "class Z { static method main() locals 1 {\n new A\n invokevirtual A.m\n return\n } }")
    prog = lower_virtual(convert(m), m)
    assert any(isinstance(i, Call) for i in prog.functions["Z.main"].body)


@pytest.mark.parametrize("handler,caught", [("Sub", True), ("Oops", True), ("RuntimeException", True),
                                            ("ArithmeticException", False)])
def test_exception_dispatch(handler, caught):
    m = parse_module(EXCEPTIONS.replace("CAUGHT", handler))
    entry = m.cls("X").method("main")
    res = same_outcomes(m, entry, [[0], [1]])
    assert res[1].kind == "returned" and res[1].value == 5
    if caught:
        assert res[0].kind == "returned" and res[0].value == -1
    else:
        assert res[0].kind == "uncaught" and res[0].pid == "X.main.no-uncaught-exception.1"


def test_runtime_checks_become_properties_or_throws():
    m = parse_module(DIV)
    entry = m.cls("D").method("f")
    off = build_goto(m, entry)
    assert [p.pid for p in off.properties] == ["D.f.div-by-zero.1"]
    on = build_goto(m, entry, GotoOptions(throw_runtime=True))
    assert [p.pid for p in on.properties] == ["D.f.no-uncaught-exception.1"]
    assert run_goto(off, [3, 0]) == ("violated", "D.f.div-by-zero.1")
    assert run_goto(on, [3, 0]) == ("violated", "D.f.no-uncaught-exception.1")
    assert run_goto(on, [-7, 2])[0] == "returned"


def test_null_check_precedes_bounds_check():
    m = load("BinarySearch.mjb")
    entry = m.cls("BinarySearch").method("binarySearch")
    prog = build_goto(m, entry)
    assert run_goto(prog, [None, 1]) == ("violated", "BinarySearch.binarySearch.null-deref.1")
    assert run_goto(prog, [[], 1]) == ("violated", "BinarySearch.binarySearch.array-bounds.1")


def test_binary_search_null_escapes_as_exception():
    m = load("BinarySearch.mjb")
    entry = m.cls("BinarySearch").method("binarySearch")
    res = same_outcomes(m, entry, [[None, 1], [[1, 2, 3], 2]], throw_runtime=True)
    assert res[0].kind == "uncaught" and res[0].exc_class == "NullPointerException"
    assert res[1].kind == "returned" and res[1].value == 1


def test_loop_guard_matches_interpreter():
    """The getLastToken loop lowers to guarded gotos with the same behaviour."""
    m = load("StringUtil.mjb")
    entry = m.cls("StringUtil").method("getLastToken")
    prog = build_goto(m, entry)
    back = [i for i in prog.functions[entry.qualname].body if isinstance(i, Goto) and i.back]
    assert len(back) == 1
    rng = random.Random(5)
    feeds = []
    for _ in range(100):
        s = "".join(rng.choice("ab,") for _ in range(rng.randint(0, 7)))
        feeds.append([s, ord(rng.choice(",a")), rng.randint(-1, 4)])
    same_outcomes(m, entry, feeds)


def test_locator_dispatch_and_strings():
    m = load("LocatorHandler.mjb")
    entry = m.cls("LocatorHandler").method("autoLocator")
    same_outcomes(m, entry, [["xpath=//a", 0], ["id=k", 1], ["foo", 0], ["id=", 1], ["x", 7]])


def test_layout_extends_superclass_layout():
    m = load("LocatorHandler.mjb")
    base = m.all_fields("Locator")
    for sub in ("XPathLocator", "IdLocator"):
        assert m.all_fields(sub)[:len(base)] == base


def test_property_numbering_is_deterministic():
    m = load("BinarySearch.mjb")
    entry = m.cls("BinarySearch").method("binarySearch")
    a, b = build_goto(m, entry), build_goto(m, entry)
    assert [p.pid for p in a.properties] == [p.pid for p in b.properties]
    assert show_goto(a) == show_goto(b)
    kinds = {}
    for p in a.properties:
        kinds.setdefault(p.kind, []).append(int(p.pid.rsplit(".", 1)[1]))
    assert all(ns == list(range(1, len(ns) + 1)) for ns in kinds.values())


@pytest.mark.parametrize("throw_runtime", [False, True])
def test_semantic_preservation_random(throw_runtime):
    for seed in range(25):
        g = random_program(random.Random(seed))
        m = parse_module(g.text, "Gen.mjb")
        feeds = itertools.product(range(-2, 3), repeat=g.params + g.nondets)
        same_outcomes(m, m.cls("Gen").method("main"), feeds, throw_runtime)


def test_unknown_virtual_target_is_a_conversion_error():
    m = parse_module("class A { method m() locals 1 {\n return\n } }\nclass B extends A { }")
    prog = convert(m)
    prog.functions["A.m"].body.insert(0, VCall(prog.functions["A.m"].body[0].loc, "A", "zz",
                                                     [E.NULL], None))
    with pytest.raises(ConversionError):
        lower_virtual(prog, m)
