import pytest

from minibmc import expr as E
from minibmc.frontend import parse_module
from minibmc.gotoc import GotoOptions, build_goto
from minibmc.interp import run
from minibmc.options import Options
from minibmc.symex import State, Symex, SymexError, build_vc, show_vcc, unwind, violation
from minibmc.verify import verify
from util import load

NONDET_SELF_EQ = """class S {
  static method main(int) locals 1 (x) {
    load 0
    load 0
    if_eq ok
    const 0
    goto chk
   ok:
    const 1
   chk:
    assert
    return
  }
}
"""

# for (i = 0; i < 3; i++) { }  assert i < 3
COUNT_TO_THREE = """class L {
  static method main() locals 1 (i) {
    const 0
    store 0
   head:
    load 0
    const 3
    if_ge done
    load 0
    const 1
    add
    store 0
    goto head
   done:
    load 0
    const 3
    if_lt ok
    const 0
    goto chk
   ok:
    const 1
   chk:
    assert
    return
  }
}
"""

OBJECTS = """class P { field v : int; }
class Q extends P { }
class H { static method main() locals 0 {
    return
  } }
"""


def ssa_of(model, entry, opts=Options()):
    return unwind(build_goto(model, entry, GotoOptions(opts.throw_runtime)), opts)


def test_nondet_self_equality():
    m = parse_module(NONDET_SELF_EQ)
    entry = m.cls("S").method("main")
    ssa = ssa_of(m, entry)
    assert ssa.property_ids() == ["S.main.assertion.1"]
    [inst] = ssa.properties
    assert inst.claim is E.TRUE
    assert verify(m, entry).result("S.main.assertion.1").status == "SUCCESS"


@pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
def test_loop_bound_against_interpreter(k):
    m = parse_module(COUNT_TO_THREE)
    entry = m.cls("L").method("main")
    opts = Options(unwind=k)
    status = verify(m, entry, opts).result("L.main.assertion.1").status
    oracle = run(m, entry, [], 10_000, opts)
    assert status == ("FAILURE" if oracle.violated else "SUCCESS")
    # the exit test after the third iteration needs the back-edge a third time
    assert status == ("SUCCESS" if k < 4 else "FAILURE")


def test_unwinding_assertions_flag_reports_cutoff():
    m = parse_module(COUNT_TO_THREE)
    entry = m.cls("L").method("main")
    ver = verify(m, entry, Options(unwind=3, unwinding_assertions=True))
    assert ver.result("L.main.unwind.1").status == "FAILURE"
    assert ver.result("L.main.assertion.1").status == "SUCCESS"
    ver = verify(m, entry, Options(unwind=4, unwinding_assertions=True))
    assert [r.info.pid for r in ver.results] == ["L.main.assertion.1"]
    assert ver.failed


def test_get_last_token_property():
    m = load("StringUtil.mjb")
    entry = m.cls("StringUtil").method("getLastToken")
    ssa = ssa_of(m, entry, Options(unwind=2, max_nondet_string_length=100))
    assert "StringUtil.getLastToken.assertion.1" in ssa.property_ids()
    assert ssa.infos()["StringUtil.getLastToken.assertion.1"].line == 17


def test_bound_must_be_positive():
    m = parse_module(NONDET_SELF_EQ)
    prog = build_goto(m, m.cls("S").method("main"))
    with pytest.raises(SymexError):
        unwind(prog, Options(unwind=0))
    with pytest.raises(SymexError):
        unwind(prog, Options(), entry="Nope.main")


def test_single_assignment_and_determinism():
    m = load("BinarySearch.mjb")
    entry = m.cls("BinarySearch").method("binarySearch")
    a = ssa_of(m, entry, Options(unwind=3))
    b = ssa_of(m, entry, Options(unwind=3))
    assert show_vcc(a) == show_vcc(b)
    defined = [s.lhs.val for s in a.steps if s.lhs is not None]
    assert len(defined) == len(set(defined))
    assert all("#" in name for name in defined)


def test_empty_property_set_gives_false():
    m = parse_module("class Z { static method main() locals 0 {\n return\n } }")
    ssa = ssa_of(m, m.cls("Z").method("main"))
    assert ssa.property_ids() == []
    assert build_vc(ssa) is E.FALSE


def test_reachable_false_assertion():
    m = parse_module("class Z { static method main(int) locals 1 {\n const 0\n assert\n return\n } }")
    entry = m.cls("Z").method("main")
    ssa = ssa_of(m, entry)
    assert violation(ssa, "Z.main.assertion.1") is E.TRUE
    assert verify(m, entry).failed


def test_equivalence_harness_holds():
    m = load("SignalUtil.mjb", "EquivalenceCheck.mjb")
    ver = verify(m, m.cls("EquivalenceCheck").method("check"))
    assert [r.status for r in ver.results] == ["SUCCESS"]
    assert ver.results[0].info.bytecode_index == 8


def symex_for(model):
    prog = build_goto(model, model.cls("H").method("main"))
    return Symex(prog, Options()), State((), {}, {})


def test_field_select_single_candidate_is_direct():
    m = parse_module(OBJECTS)
    sx, st = symex_for(m)
    r = sx.allocate(st, "P", None)
    v = sx.field_select(st, r, ("P", "v"), E.INT)
    assert v.op != "ite"
    assert v is st.values["dynamic_object1.v"]


def test_field_select_two_candidates_is_an_ite():
    m = parse_module(OBJECTS)
    sx, st = symex_for(m)
    r1 = sx.allocate(st, "P", None)
    r2 = sx.allocate(st, "Q", None)
    st.values["dynamic_object1.v"] = E.intc(1)
    st.values["dynamic_object2.v"] = E.intc(2)
    c = E.sym("c", E.BOOL)
    v = sx.field_select(st, E.ite(c, r1, r2), ("P", "v"), E.INT)
    assert v.op == "ite" and v.args[0].op == "eq"


def test_field_select_without_candidates_is_free():
    m = parse_module(OBJECTS)
    sx, st = symex_for(m)
    v = sx.field_select(st, E.sym("r", E.REF), ("P", "v"), E.INT)
    assert v.op == "sym" and v.val.startswith("nondet#")


def test_nullable_receiver_both_branches():
    """An input object that may be null: both reference values are realised."""
    src = """class P { field v : int; }
class R {
  static method get(P) : int locals 1 (p) {
    load 0
    getfield P.v
    return
  }
}
"""
    m = parse_module(src)
    entry = m.cls("R").method("get")
    ver = verify(m, entry)
    r = ver.result("R.get.null-deref.1")
    assert r.status == "FAILURE"
    assert r.trace.feed == [None]
    assert run(m, entry, [None], 100).pid == "R.get.null-deref.1"
    assert run(m, entry, [True], 100).kind == "returned"
