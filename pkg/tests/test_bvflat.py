import random
from fractions import Fraction
from math import trunc

import pytest

from minibmc import expr as E
from minibmc.bvflat import FALSE_LIT, TRUE_LIT, Flattener, decode
from minibmc.satcore import Solver


# ---------------------------------------------------------------- reference

def wrap(v: int, w: int) -> int:
    half = 1 << (w - 1)
    return (v + half) % (1 << w) - half


def unsigned(v: int, w: int) -> int:
    return v % (1 << w)


def ref_div(a: int, b: int) -> int:
    # zero divisors are defined as quotient 0, remainder a (the checker guards them)
    return 0 if b == 0 else trunc(Fraction(a, b))


def ref_rem(a: int, b: int) -> int:
    return a if b == 0 else a - b * ref_div(a, b)


def reference(op: str, a: int, b: int, w: int):
    """Java int semantics on signed operands, by big-integer arithmetic."""
    ua, ub = unsigned(a, w), unsigned(b, w)
    table = {
        "add": lambda: wrap(a + b, w),
        "sub": lambda: wrap(a - b, w),
        "mul": lambda: wrap(a * b, w),
        "sdiv": lambda: wrap(ref_div(a, b), w),
        "srem": lambda: wrap(ref_rem(a, b), w),
        "udiv": lambda: wrap(ua // ub if ub else 0, w),
        "urem": lambda: wrap(ua % ub if ub else ua, w),
        "neg": lambda: wrap(-a, w),
        "slt": lambda: a < b,
        "sle": lambda: a <= b,
        "ult": lambda: ua < ub,
        "ule": lambda: ua <= ub,
        "eq": lambda: a == b,
    }
    return table[op]()


BINARY = ("add", "sub", "mul", "sdiv", "srem", "udiv", "urem")
COMPARE = ("slt", "sle", "ult", "ule", "eq")
OPS = BINARY + COMPARE + ("neg",)


def node(op: str, x: E.Expr, y: E.Expr) -> E.Expr:
    """Raw operator node, bypassing the constant folding of the expression layer."""
    if op == "neg":
        return E._mk("neg", (x,), x.sort)
    sort = E.BOOL if op in COMPARE else x.sort
    return E._mk(op, (x, y), sort)


def signed_out(v, op: str, w: int):
    return v if op in COMPARE else E.to_signed(v, w)


# ---------------------------------------------------------------- circuits

class Circuit:
    """One symbolic operator circuit, queried by fixing its input bits."""

    def __init__(self, op: str, w: int):
        self.op, self.w = op, w
        self.fl = Flattener()
        self.x, self.y = E.sym("x", E.bv(w)), E.sym("y", E.bv(w))
        self.out = node(op, self.x, self.y)
        self.fl.flatten_node(self.out)
        self.solver = Solver()
        self.copied = 0
        self.sync()

    def fix(self, e: E.Expr, v: int) -> list[int]:
        out = []
        for k, lit in enumerate(self.fl.cnf.bitmap[id(e)]):
            bit = unsigned(v, self.w) >> k & 1
            out.append(lit if bit else -lit)
        return out

    def sync(self) -> None:
        # gates built after the solver was created are copied across
        self.solver.ensure_vars(self.fl.cnf.num_vars)
        for c in self.fl.cnf.clauses[self.copied:]:
            self.solver.add_clause(c)
        self.copied = len(self.fl.cnf.clauses)

    def __call__(self, a: int, b: int):
        assum = self.fix(self.x, a)
        if self.op != "neg":
            assum += self.fix(self.y, b)
        assert self.solver.solve(assum)
        lits = self.fl.cnf.bitmap[id(self.out)]
        v = decode(lits, self.out.sort, self.solver.model)
        # the output is functionally determined: no other value is possible
        block = [lits] if self.out.sort == E.BOOL else lits
        differ = self.fl.OR(*(-l if self.solver.value(l) else l for l in block))
        self.sync()
        assert not self.solver.solve(assum + [differ])
        return signed_out(v, self.op, self.w)


def constant_eval(op: str, a: int, b: int, w: int = 32):
    fl = Flattener()
    out = node(op, E.const(a, E.bv(w)), E.const(b, E.bv(w)))
    lits = fl.flatten_node(out)
    flat = [lits] if out.sort == E.BOOL else lits
    assert all(l in (TRUE_LIT, FALSE_LIT) for l in flat), "constant inputs must fold"
    return signed_out(decode(lits, out.sort, [False] * (fl.cnf.num_vars + 1)), op, w)


# ---------------------------------------------------------------- tests

@pytest.mark.parametrize("op", OPS)
def test_four_bit_tables_exhaustive(op):
    c = Circuit(op, 4)
    for a in range(-8, 8):
        for b in range(-8, 8):
            assert c(a, b) == reference(op, a, b, 4), (op, a, b)


def interesting_32(rng: random.Random) -> int:
    r = rng.random()
    if r < 0.25:
        return rng.choice((0, 1, -1, 2, -2, 2**31 - 1, -2**31, 2**31 - 2, -2**31 + 1, 65536, -65536))
    if r < 0.5:
        return rng.randint(-300, 300)
    if r < 0.75:
        return wrap(rng.getrandbits(rng.randint(1, 32)), 32) * rng.choice((1, -1))
    return rng.randint(-2**31, 2**31 - 1)


def test_random_32_bit_constant_circuits():
    """10,000 random cases; constant inputs exercise every gate's folding path."""
    rng = random.Random(2024)
    for _ in range(10_000):
        op = rng.choice(OPS)
        a, b = wrap(interesting_32(rng), 32), wrap(interesting_32(rng), 32)
        assert constant_eval(op, a, b) == reference(op, a, b, 32), (op, a, b)


@pytest.mark.parametrize("op,count", [("add", 40), ("sub", 40), ("mul", 25), ("neg", 30),
                                      ("slt", 40), ("ult", 40), ("eq", 40),
                                      ("sdiv", 8), ("srem", 8), ("udiv", 8)])
def test_random_32_bit_symbolic_circuits(op, count):
    rng = random.Random(op)
    c = Circuit(op, 32)
    cases = [(-2**31, -1), (-2**31, 1), (7, 0), (-7, 2)]
    cases += [(interesting_32(rng), interesting_32(rng)) for _ in range(count)]
    for a, b in cases:
        a, b = wrap(a, 32), wrap(b, 32)
        assert c(a, b) == reference(op, a, b, 32), (op, a, b)


def test_extensions_and_truncation():
    for v in range(-8, 8):
        x = E.const(v, E.bv(4))
        for op, sort, want in (("sext", E.bv(8), wrap(v, 8)),
                               ("zext", E.bv(8), unsigned(v, 4)),
                               ("trunc", E.bv(2), wrap(v, 2))):
            n = E._mk(op, (x,), sort)
            lits = Flattener().flatten_node(n)
            got = decode(lits, sort, [False])
            assert E.to_signed(got, sort.width) == want if op != "zext" else got == want


def test_evaluator_agrees_with_reference():
    rng = random.Random(7)
    for _ in range(3000):
        op = rng.choice(OPS)
        a, b = interesting_32(rng), interesting_32(rng)
        n = node(op, E.const(a), E.const(b))
        got = E.evaluate(n, lambda s: None)
        assert signed_out(got, op, 32) == reference(op, wrap(a, 32), wrap(b, 32), 32)


def test_arrays_select_store():
    fl = Flattener(max_array_length=4)
    arr = E.sym("a", E.ARRAY)
    i = E.sym("i", E.INT)
    upd = E.store(arr, i, E.intc(9))
    goal = E.and_(E.eq(E.select(upd, E.intc(2)), E.intc(9)),
                  E.eq(E.select(arr, E.intc(2)), E.intc(5)))
    root = fl.flatten(goal)
    past = fl.flatten(E.eq(i, E.intc(4)))
    s = Solver(fl.cnf.num_vars)
    for c in fl.cnf.clauses:
        s.add_clause(c)
    assert s.solve([root])
    assert fl.value(i, s.model) == 2
    # a store past the bound changes nothing
    assert not s.solve([root, past])


def test_ite_and_boolean_structure():
    fl = Flattener()
    p, q = E.sym("p", E.BOOL), E.sym("q", E.BOOL)
    x = E.sym("x", E.INT)
    f = E.eq(E.ite(p, E.intc(3), E.intc(4)), x)
    g = E.and_(f, E.or_(E.not_(p), q), E.implies(q, E.eq(x, E.intc(4))))
    root = fl.flatten(g)
    s = Solver(fl.cnf.num_vars)
    for c in fl.cnf.clauses:
        s.add_clause(c)
    assert s.solve([root])
    assert not s.value(fl.cnf.bitmap[id(p)])
    assert fl.value(x, s.model) == 4
