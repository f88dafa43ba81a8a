"""String constraints by axiom instantiation and index-set refinement.

Strings are (length, characters) pairs.  Each string function application
left uninterpreted by the flattener is axiomatised into existential
constraints (added to the SAT solver right away) and universal axioms

    forall i. lo <= i < hi -> body(i)

whose character accesses are ``s[a*i + b]`` with ``a`` in {1, -1}.  Universal
axioms are only ever added as instances at indices drawn from per-string
index sets; :meth:`StringSystem.solve` alternates SAT solving, checking the
candidate model against the full axioms, and growing the index sets.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Iterable

from . import expr as E
from .bvflat import Flattener, StrApp, decode
from .expr import BOOL, CHAR, INT, STRING, Expr
from .satcore import Solver

PROPAGATION_CAP = 12      # largest index expression created by propagation


class StringSolverError(Exception):
    pass


@dataclass(frozen=True)
class Access:
    string: Expr
    a: int          # +1 or -1
    b: Expr

    def index(self, i: Expr) -> Expr:
        if self.a == -1:
            return E.sub(self.b, i)
        if _is_zero(self.b):
            return i
        return E.sub(i, self.b.args[0]) if self.b.op == "neg" else E.add(i, self.b)

    def invert(self, idx: Expr) -> Expr:
        """The value of the bound variable for which this access hits ``idx``."""
        if self.a == 1:
            return idx if _is_zero(self.b) else E.sub(idx, self.b)
        return E.sub(self.b, idx)


def normalize(e: Expr) -> Expr:
    """Canonical form of a linear integer expression: sorted atoms, then the constant."""
    if e.op == "const" or e.op == "sym" or e.op == "strlen":
        return e
    terms: dict[str, list] = {}
    const = 0

    def walk(n: Expr, k: int) -> None:
        nonlocal const
        if n.op == "const":
            const += k * n.signed
        elif n.op == "add":
            walk(n.args[0], k)
            walk(n.args[1], k)
        elif n.op == "sub":
            walk(n.args[0], k)
            walk(n.args[1], -k)
        elif n.op == "neg":
            walk(n.args[0], -k)
        else:
            key = E.to_str(n)
            entry = terms.setdefault(key, [n, 0])
            entry[1] += k

    walk(e, 1)
    out = None
    for key in sorted(terms):
        atom, k = terms[key]
        if k == 0:
            continue
        term = atom if abs(k) == 1 else E.mul(E.intc(abs(k)), atom)
        if out is None:
            out = term if k > 0 else E.neg(term)
        else:
            out = E.add(out, term) if k > 0 else E.sub(out, term)
    if out is None:
        return E.intc(const)
    if const > 0:
        return E.add(out, E.intc(const))
    if const < 0:
        return E.sub(out, E.intc(-const))
    return out


def _is_zero(e: Expr) -> bool:
    return e.op == "const" and e.val == 0


@dataclass
class UniversalAxiom:
    var: Expr
    lo: Expr
    hi: Expr
    body: Expr
    act: Expr                 # activation: application active and its premise holds
    accesses: tuple
    origin: str = ""

    def instantiate(self, iv: Expr) -> Expr:
        body = E.substitute(self.body, {id(self.var): iv})
        return E.implies(E.and_(self.act, E.sle(self.lo, iv), E.slt(iv, self.hi)), body)

    def __str__(self) -> str:
        return f"forall {fmt(self.var)}. {fmt(self.lo)} <= {fmt(self.var)} < {fmt(self.hi)} -> {fmt(self.body)}"


# ----------------------------------------------------------------- printing

_OPS = {"add": "+", "sub": "-", "mul": "*", "eq": "=", "slt": "<", "sle": "<=", "and": "&&", "or": "||"}


def fmt(e: Expr, top: bool = True) -> str:
    """Compact infix rendering used for axiom listings."""
    op = e.op
    if op == "sym":
        return e.val.split("::", 1)[-1].lstrip("@")
    if op == "const":
        if e.sort == BOOL:
            return "true" if e.val else "false"
        if e.sort == CHAR:
            return _char(e.val)
        return str(e.signed)
    if op == "strlen":
        return f"{fmt(e.args[0], False)}.length"
    if op == "strchar":
        return f"{fmt(e.args[0], False)}.charArray[{fmt(e.args[1])}]"
    if op == "zext":
        return fmt(e.args[0], top)
    if op == "not":
        a = e.args[0]
        if a.op == "eq":
            return _wrap(f"{fmt(a.args[0], False)} != {fmt(a.args[1], False)}", top)
        return "!" + fmt(a, False)
    if op == "sapp":
        kind, val = e.val
        if kind == "literal":
            return '"' + "".join(_char(ord(c))[1:-1] for c in val) + '"'
        return f"{kind}(" + ", ".join(fmt(a) for a in e.args) + ")"
    if op == "ite":
        c, a, b = e.args
        return _wrap(f"{fmt(c, False)} ? {fmt(a, False)} : {fmt(b, False)}", top)
    if op == "or" and len(e.args) == 2 and e.args[0].op == "not":
        return _wrap(f"{fmt(e.args[0].args[0], False)} -> {fmt(e.args[1], False)}", top)
    if op == "eq":
        a, b = e.args
        if b.op in ("strlen", "strchar") and a.op not in ("strlen", "strchar"):
            a, b = b, a          # the string access reads better on the left
        return _wrap(f"{fmt(a, a.sort != BOOL)} = {fmt(b, b.sort != BOOL)}", top)
    if op in _OPS:
        # relations bind looser than arithmetic, so their sides need no parentheses
        flat = op in ("eq", "slt", "sle")
        return _wrap(f" {_OPS[op]} ".join(fmt(a, flat and a.sort != BOOL) for a in e.args), top)
    return E.to_str(e)


def _wrap(s: str, top: bool) -> str:
    return s if top else f"({s})"


def _char(v: int) -> str:
    if 32 <= v < 127 and chr(v) not in "'\\":
        return f"'{chr(v)}'"
    return f"'\\u{v:04x}'"


# -------------------------------------------------------------- axiomatize

class _Builder:
    """Collects the constraints of one application."""

    def __init__(self, system: "StringSystem", app: StrApp, origin: str):
        self.system = system
        self.app = app
        self.origin = origin
        self.exists: list[Expr] = []
        self.shown: list[Expr] = []
        self.axioms: list[UniversalAxiom] = []

    def exist(self, c: Expr, act: Expr | None = None) -> None:
        self.shown.append(c)
        self.exists.append(E.implies(self.app.act if act is None else act, c))

    def forall(self, lo: Expr, hi: Expr, body_fn, act: Expr | None = None) -> None:
        i = self.system.bound_var()
        accesses: list[Access] = []

        def at(s: Expr, b: Expr = E.intc(0), a: int = 1) -> Expr:
            acc = Access(s, a, b)
            accesses.append(acc)
            return E.strchar(s, acc.index(i))

        body = body_fn(at, i)
        act = self.app.act if act is None else act
        self.axioms.append(UniversalAxiom(i, lo, hi, body, act, tuple(accesses), self.origin))


def axiomatize(system: "StringSystem", app: StrApp):
    """Existential constraints (guarded, and as displayed) and universal axioms
    defining one application."""
    kind = app.kind
    L = E.strlen
    zero = E.intc(0)
    origin = _origin(app)
    bld = _Builder(system, app, origin)
    if kind == "copy":
        r, s = app.result, app.args[0]
        bld.exist(E.eq(L(r), L(s)))
        bld.forall(zero, L(r), lambda at, i: E.eq(at(r), at(s)))
    elif kind == "literal":
        r, lit = app.result, app.args[0]
        text = lit.val[1]
        bld.exist(E.eq(L(r), E.intc(len(text))))
        for k, ch in enumerate(text):
            bld.exist(E.eq(E.strchar(r, E.intc(k)), E.const(ord(ch), CHAR)))
    elif kind == "substring":
        r, (s, b, e) = app.result, app.args
        act = E.and_(app.act, E.sle(zero, b), E.sle(b, e), E.sle(e, L(s)))
        bld.exist(E.eq(L(r), E.sub(e, b)), act)
        bld.forall(zero, E.sub(e, b), lambda at, i: E.eq(at(r), at(s, b)), act)
    elif kind in ("insert", "concat"):
        if kind == "concat":
            r, (s, t) = app.result, app.args
            off = L(s)
            act = app.act
        else:
            r, (s, t, off) = app.result, app.args
            act = E.and_(app.act, E.sle(zero, off), E.sle(off, L(s)))
        bld.exist(E.eq(L(r), E.add(L(s), L(t))), act)
        bld.forall(zero, off, lambda at, i: E.eq(at(r), at(s)), act)
        bld.forall(off, E.add(off, L(t)), lambda at, i: E.eq(at(r), at(t, E.neg(off))), act)
        bld.forall(E.add(off, L(t)), L(r), lambda at, i: E.eq(at(r), at(s, E.neg(L(t)))), act)
    elif kind == "equals":
        s, t = app.args
        res = app.node
        bld.exist(E.eq(L(s), L(t)), res)
        bld.forall(zero, L(s), lambda at, i: E.eq(at(s), at(t)), res)
        w = system.witness("w")
        bld.exist(E.or_(E.ne(L(s), L(t)),
                        E.and_(E.sle(zero, w), E.slt(w, L(s)),
                               E.ne(E.strchar(s, w), E.strchar(t, w)))), E.not_(res))
    elif kind == "startswith":
        s, p = app.args
        res = app.node
        bld.exist(E.sle(L(p), L(s)), res)
        bld.forall(zero, L(p), lambda at, i: E.eq(at(s), at(p)), res)
        w = system.witness("w")
        bld.exist(E.or_(E.slt(L(s), L(p)),
                        E.and_(E.sle(zero, w), E.slt(w, L(p)),
                               E.ne(E.strchar(s, w), E.strchar(p, w)))), E.not_(res))
    elif kind == "indexof":
        s, c, frm = app.args
        res = app.node
        start = E.ite(E.slt(frm, zero), zero, frm)
        found = system.witness("found", BOOL)

        def differs(at, i):
            return E.ne(E.zext(at(s), 32), c)

        missing_act = E.and_(app.act, E.not_(found))
        bld.exist(E.eq(res, E.intc(-1)), missing_act)
        bld.forall(start, L(s), differs, missing_act)
        found_act = E.and_(app.act, found)
        bld.exist(E.and_(E.sle(start, res), E.slt(res, L(s)),
                         E.eq(E.zext(E.strchar(s, res), 32), c)), found_act)
        bld.forall(start, res, differs, found_act)
    elif kind == "of_int":
        _axiomatize_of_int(bld, app, system)
    else:
        raise StringSolverError(f"unsupported string operation {kind!r}")
    return bld.exists, bld.axioms, bld.shown


def _axiomatize_of_int(bld: _Builder, app: StrApp, system: "StringSystem") -> None:
    r, (n,) = app.result, app.args
    neg = E.slt(n, E.intc(0))
    mag = E.ite(neg, E.neg(n), n)          # |MIN| = 2^31 read unsigned
    # fresh decimal digits tied to the magnitude by a Horner sum; no dividers
    digits = [system.witness("digit", E.bv(4)) for _ in range(10)]
    for d in digits:
        bld.exist(E.ule(d, E.const(9, E.bv(4))))
    horner = E.zext(digits[9], 36)
    for d in reversed(digits[:9]):
        horner = E.add(E.mul(horner, E.const(10, E.bv(36))), E.zext(d, 36))
    bld.exist(E.eq(horner, E.zext(mag, 36)))
    nd = E.intc(1)
    for k in range(1, 10):
        nd = E.add(nd, E.ite(E.ule(E.intc(10 ** k), mag), E.intc(1), E.intc(0)))
    length = E.add(nd, E.ite(neg, E.intc(1), E.intc(0)))
    bld.exist(E.eq(E.strlen(r), length))
    for count in range(1, 11):
        for sign in (False, True):
            case = E.and_(E.eq(nd, E.intc(count)), neg if sign else E.not_(neg))
            chars = []
            if sign:
                chars.append(E.eq(E.strchar(r, E.intc(0)), E.const(ord("-"), CHAR)))
            for p in range(count):
                d = digits[count - 1 - p]
                ch = E.add(E.zext(d, 16), E.const(ord("0"), CHAR))
                chars.append(E.eq(E.strchar(r, E.intc(p + sign)), ch))
            bld.exist(E.implies(case, E.and_(*chars)))


def _origin(app: StrApp) -> str:
    args = ", ".join(fmt(a) for a in app.args)
    if app.kind in ("copy", "literal"):
        return f"{fmt(app.result)} = {args}"
    if app.result is app.node:
        return f"{app.kind}({args})"
    return f"{fmt(app.result)} = {app.kind}({args})"


# ----------------------------------------------------------------- system

@dataclass
class Violation:
    axiom: UniversalAxiom
    witness: int


class StringSystem:
    """Existential constraints, universal axioms and index sets over a flattener."""

    def __init__(self, fl: Flattener, solver: Solver | None = None):
        self.fl = fl
        self.solver = solver or Solver()
        self.max_len = fl.max_string_length
        self.axioms: list[UniversalAxiom] = []
        self.exists: list[Expr] = []
        self.index: dict[int, dict[int, Expr]] = {}
        self.done: set[tuple[int, int]] = set()
        self.rounds = 0
        self._apps_seen = 0
        self._clauses_sent = 0
        self._fresh = 0
        self._reads_seen: dict[int, int] = {}
        self.derived: set[tuple[int, int]] = set()
        self.records: list[tuple[str, list[Expr], list[UniversalAxiom]]] = []
        self.completed: dict[int, str] = {}
        self.assignment: list | None = None

    # -------------------------------------------------------- bookkeeping
    def bound_var(self) -> Expr:
        self._fresh += 1
        return E.sym(f"@i{self._fresh}", INT)

    def witness(self, base: str, sort: E.Sort = INT) -> Expr:
        self._fresh += 1
        return E.sym(f"@{base}{self._fresh}", sort)

    def index_set(self, s: Expr) -> dict[int, Expr]:
        key = id(s)
        if key not in self.index:
            self.index[key] = {}
            self.add_index(s, E.intc(0))
            self.add_index(s, E.sub(E.strlen(s), E.intc(1)))
        return self.index[key]

    def add_index(self, s: Expr, idx: Expr, derived: bool = False) -> bool:
        idx = normalize(idx)
        ids = self.index.setdefault(id(s), {})
        if id(idx) in ids:
            return False
        ids[id(idx)] = idx
        if derived:
            self.derived.add((id(s), id(idx)))
        return True

    def sync(self) -> None:
        """Send newly generated clauses to the solver."""
        cnf = self.fl.cnf
        self.solver.ensure_vars(cnf.num_vars)
        for c in cnf.clauses[self._clauses_sent:]:
            self.solver.add_clause(c)
        self._clauses_sent = len(cnf.clauses)

    def register(self) -> None:
        """Axiomatise applications the flattener reported since the last call."""
        while self._apps_seen < len(self.fl.cnf.apps):
            app = self.fl.cnf.apps[self._apps_seen]
            self._apps_seen += 1
            exists, axioms, shown = axiomatize(self, app)
            self.records.append((_origin(app), shown, axioms))
            for c in exists:
                self.exists.append(c)
                self.fl.assert_expr(c)
            for ax in axioms:
                self.axioms.append(ax)
                for acc in ax.accesses:
                    self.fl.string_var(acc.string)
        self._absorb_reads()

    def _absorb_reads(self) -> None:
        """Seed index sets with character indices read outside axiom instances."""
        for key, s in list(self.fl.strings.items()):
            self.index_set(s)
            reads = self.fl.char_reads.get(key, [])
            for idx in reads[self._reads_seen.get(key, 0):]:
                self.add_index(s, idx)
            self._reads_seen[key] = len(reads)

    def _skip_reads(self) -> None:
        for key, reads in self.fl.char_reads.items():
            self._reads_seen[key] = len(reads)

    def instantiate(self) -> int:
        """Instantiate every axiom at every index of the strings it accesses."""
        added = 0
        changed = True
        while changed:
            changed = False
            for n, ax in enumerate(self.axioms):
                for acc in ax.accesses:
                    for idx in list(self.index_set(acc.string).values()):
                        iv = normalize(acc.invert(idx))
                        if (n, id(iv)) in self.done:
                            continue
                        self.done.add((n, id(iv)))
                        self.fl.assert_expr(ax.instantiate(iv))
                        self._skip_reads()
                        added += 1
                        if (id(acc.string), id(idx)) in self.derived:
                            continue
                        # one propagation step: the index this instance reads in
                        # the other strings of the equation
                        for other in ax.accesses:
                            if other is acc:
                                continue
                            j = other.index(iv)
                            if E.size(j) <= PROPAGATION_CAP and \
                                    self.add_index(other.string, j, derived=True):
                                changed = True
        return added

    def saturate(self) -> None:
        """Add every in-range constant index: instantiation becomes exhaustive."""
        for ax in self.axioms:
            for acc in ax.accesses:
                for k in range(self.max_len):
                    self.add_index(acc.string, E.intc(k))

    # --------------------------------------------------------------- solve
    def solve(self, assumptions: Iterable[int] = ()) -> bool:
        assumptions = list(assumptions)
        saturated = False
        while True:
            self.register()
            self.instantiate()
            self.sync()
            if not self.solver.solve(assumptions):
                return False
            model = self.solver.model
            comp = self.complete(model)
            violations = self.check_model(model, comp)
            if not violations:
                self.assignment = list(model)
                self.completed = comp
                return True
            self.rounds += 1
            grew = self.refine(violations, model, comp)
            budget = self.max_len * max(1, len(self.axioms)) + 1
            if not grew or self.rounds > budget:
                if saturated:
                    raise StringSolverError("string refinement made no progress")
                self.saturate()
                saturated = True

    # ---------------------------------------------------------- model side
    def length(self, s: Expr, model) -> int:
        return E.to_signed(decode(self.fl.str_len[id(s)], INT, model))

    def known(self, s: Expr, model) -> dict[int, int]:
        """Character values at the indices the instantiated constraints read."""
        if s.op == "sapp" and s.val[0] == "literal":
            return {k: ord(c) for k, c in enumerate(s.val[1])}
        n = self.length(s, model)
        cells = self.fl.str_cells.get(id(s), {})
        out = {}
        for idx in self.fl.char_reads.get(id(s), ()):
            lits = self.fl.cnf.bitmap.get(id(idx))
            if lits is None:
                continue
            k = E.to_signed(decode(lits, INT, model))
            if 0 <= k < n and k in cells:
                out[k] = decode(cells[k], CHAR, model)
        return out

    def complete(self, model) -> dict[int, str]:
        """Completed model of every string: unknown positions copy the next known one."""
        out = {}
        for key, s in self.fl.strings.items():
            if s.op == "sapp" and s.val[0] == "literal":
                out[key] = s.val[1]
                continue
            n = self.length(s, model)
            out[key] = complete_string(n, self.known(s, model))
        return out

    def evaluate(self, e: Expr, model, comp: dict[int, str], env: dict | None = None,
                 memo: dict | None = None) -> Any:
        """Value of ``e`` under the SAT model, reading characters from completed strings."""
        bitmap = self.fl.cnf.bitmap
        if memo is None:
            memo = dict(env or {})

        def go(n: Expr) -> Any:
            if id(n) in memo:
                return memo[id(n)]
            if n.sort == STRING:
                v = comp.get(id(n), "")
            elif n.op == "strchar":
                s = comp.get(id(n.args[0]), "")
                k = E.to_signed(go(n.args[1]))
                v = ord(s[k]) if 0 <= k < len(s) else 0
            elif n.op == "strlen":
                v = len(comp.get(id(n.args[0]), ""))
            elif id(n) in bitmap:
                v = decode(bitmap[id(n)], n.sort, model)
            elif n.op == "sym":
                v = False if n.sort == BOOL else 0
            elif n.op == "ite":
                v = go(n.args[1]) if go(n.args[0]) else go(n.args[2])
            else:
                v = E._eval_node(n, [go(a) for a in n.args], None)
            memo[id(n)] = v
            return v

        return go(e)

    def cascade(self, s: Expr, x: Expr, comp_known: dict[int, int]) -> Expr:
        """ite(x <= k1, v1, ite(x <= k2, v2, ... v_last)) over the known indices."""
        if not comp_known:
            return E.const(0, CHAR)
        ks = sorted(comp_known)
        out = E.const(comp_known[ks[-1]], CHAR)
        for k in reversed(ks[:-1]):
            out = E.ite(E.sle(x, E.intc(k)), E.const(comp_known[k], CHAR), out)
        return out

    def check_axiom(self, ax: UniversalAxiom, model, comp: dict[int, str],
                    known: dict[int, dict[int, int]]) -> int | None:
        """A witness i violating the axiom under the completed model, or None."""
        if not self.evaluate(ax.act, model, comp):
            return None
        lo = E.to_signed(self.evaluate(ax.lo, model, comp))
        hi = E.to_signed(self.evaluate(ax.hi, model, comp))
        if lo >= hi:
            return None
        i = ax.var
        dependent = {id(n) for n in _depends_on(ax.body, i)}
        memo: dict[int, Expr] = {}

        def go(n: Expr) -> Expr:
            if id(n) in memo:
                return memo[id(n)]
            if id(n) not in dependent:
                v = self.evaluate(n, model, comp)
                r = E.const(v, n.sort)
            elif n is i:
                r = n
            elif n.op == "strchar":
                s = n.args[0]
                if id(s) not in known:
                    known[id(s)] = _known_from(comp.get(id(s), ""), self.known(s, model))
                r = self.cascade(s, go(n.args[1]), known[id(s)])
            else:
                r = E.rebuild(n, tuple(go(a) for a in n.args))
            memo[id(n)] = r
            return r

        body = go(ax.body)
        negation = E.and_(E.sle(E.intc(lo), i), E.slt(i, E.intc(hi)), E.not_(body))
        if negation is E.FALSE:
            return None
        fl = Flattener(self.fl.max_array_length, self.max_len)
        fl.assert_expr(negation)
        solver = Solver(fl.cnf.num_vars)
        for c in fl.cnf.clauses:
            solver.add_clause(c)
        if not solver.solve():
            return None
        if id(i) not in fl.cnf.bitmap:
            return lo
        return E.to_signed(fl.value(i, solver.model))

    def check_model(self, model, comp: dict[int, str]) -> list[Violation]:
        out = []
        known: dict[int, dict[int, int]] = {}
        for ax in self.axioms:
            w = self.check_axiom(ax, model, comp, known)
            if w is not None:
                out.append(Violation(ax, w))
        return out

    def refine(self, violations: list[Violation], model, comp: dict[int, str]) -> bool:
        grew = False
        for v in violations:
            env = {id(v.axiom.var): v.witness & 0xFFFFFFFF}
            for acc in v.axiom.accesses:
                k = E.to_signed(self.evaluate(acc.index(v.axiom.var), model, comp, env))
                if 0 <= k < self.max_len and self.add_index(acc.string, E.intc(k)):
                    grew = True
        return grew

    # --------------------------------------------------------------- output
    def string_value(self, s: Expr) -> str:
        if s.op == "sapp" and s.val[0] == "literal":
            return s.val[1]
        return self.completed.get(id(s), "")

    def show(self) -> str:
        lines = []
        for origin, shown, axioms in self.records:
            lines.append(f"[{origin}]")
            lines.extend(f"  {fmt(c)}" for c in shown)
            lines.extend(f"  {ax}" for ax in axioms)
        lines.append("index sets:")
        for key, idxs in self.index.items():
            s = self.fl.strings.get(key)
            if s is None or s.op == "sapp" and s.val[0] == "literal":
                continue
            shown = ", ".join(sorted(fmt(x) for x in idxs.values()))
            lines.append(f"  {fmt(s)}: {{{shown}}}")
        return "\n".join(lines)


def complete_string(n: int, known: dict[int, int]) -> str:
    """Length-n string agreeing with ``known``; other positions take the next known
    value above them, or the last known value past the top."""
    if n <= 0:
        return ""
    ks = sorted(k for k in known if 0 <= k < n)
    if not ks:
        return "\x00" * n
    out = []
    j = 0
    for p in range(n):
        while j < len(ks) and ks[j] < p:
            j += 1
        k = ks[j] if j < len(ks) else ks[-1]
        out.append(chr(known[k]))
    return "".join(out)


def _known_from(text: str, known: dict[int, int]) -> dict[int, int]:
    return {k: v for k, v in known.items() if 0 <= k < len(text)}


def _depends_on(e: Expr, var: Expr) -> list[Expr]:
    dep: set[int] = set()
    out = []
    for n in E.iter_dag(e):
        if n is var or any(id(a) in dep for a in n.args):
            dep.add(id(n))
            out.append(n)
    return out


# ------------------------------------------------------------ entry points

@dataclass
class StringResult:
    sat: bool
    model: dict[str, Any]
    system: StringSystem


def solve_constraints(constraints: Iterable[Expr], variables: Iterable[Expr] = (),
                      max_string_length: int = 16) -> StringResult:
    """Decide a conjunction of constraints; the model maps variable names to values."""
    fl = Flattener(max_string_length=max_string_length)
    for c in constraints:
        fl.assert_expr(c)
    system = StringSystem(fl)
    if not system.solve():
        return StringResult(False, {}, system)
    model: dict[str, Any] = {}
    for v in variables:
        if v.sort == STRING:
            if id(v) in fl.strings:
                model[v.val] = system.string_value(v)
            else:
                model[v.val] = ""
        elif id(v) in fl.cnf.bitmap:
            value = fl.value(v, system.assignment)
            model[v.val] = value if v.sort == BOOL else E.to_signed(value, v.sort.width)
        else:
            model[v.val] = 0
    return StringResult(True, model, system)


# ------------------------------------------------------ constraint files
#
#   string s, t          declarations
#   int n
#   r = concat(s, t)     definition; substring and insert also assert their premise
#   assert len(r) == n && charat(r, 0) == 'a'
#
# Operations: len charat indexof equals startswith concat substring insert
# of_int.  Ints are 32-bit; characters read by charat are widened to ints.

_TOKEN = re.compile(r"""\s*(?:
    (?P<num>\d+) |
    (?P<char>'(?:\\u[0-9a-fA-F]{4}|\\.|[^'\\])') |
    (?P<str>"(?:\\u[0-9a-fA-F]{4}|\\.|[^"\\])*") |
    (?P<name>[A-Za-z_]\w*) |
    (?P<op>==|!=|<=|>=|&&|\|\||[-+<>!(),=?:])
)""", re.X)


class ScSyntaxError(StringSolverError):
    pass


def _unescape(body: str) -> str:
    out, k = [], 0
    while k < len(body):
        c = body[k]
        if c == "\\":
            nxt = body[k + 1]
            if nxt == "u":
                out.append(chr(int(body[k + 2:k + 6], 16)))
                k += 6
                continue
            out.append({"n": "\n", "t": "\t", "0": "\0"}.get(nxt, nxt))
            k += 2
            continue
        out.append(c)
        k += 1
    return "".join(out)


def _tokenize(line: str, lineno: int) -> list[tuple[str, str]]:
    toks, pos = [], 0
    line = line.rstrip()
    while pos < len(line):
        m = _TOKEN.match(line, pos)
        if not m or m.end() == pos:
            raise ScSyntaxError(f"line {lineno}: unexpected input {line[pos:].strip()!r}")
        pos = m.end()
        kind = m.lastgroup
        toks.append((kind, m.group(kind)))
    return toks


class _ScParser:
    def __init__(self, toks, lineno: int, names: dict[str, Expr], premises: list[Expr]):
        self.toks = toks
        self.k = 0
        self.lineno = lineno
        self.names = names
        self.premises = premises

    def error(self, msg: str) -> ScSyntaxError:
        return ScSyntaxError(f"line {self.lineno}: {msg}")

    def peek(self) -> str | None:
        return self.toks[self.k][1] if self.k < len(self.toks) else None

    def take(self, want: str | None = None) -> tuple[str, str]:
        if self.k >= len(self.toks):
            raise self.error("unexpected end of line")
        tok = self.toks[self.k]
        if want is not None and tok[1] != want:
            raise self.error(f"expected {want!r}, got {tok[1]!r}")
        self.k += 1
        return tok

    def done(self) -> None:
        if self.k != len(self.toks):
            raise self.error(f"trailing input {self.toks[self.k][1]!r}")

    def expr(self) -> Expr:
        c = self.disj()
        if self.peek() == "?":
            self.take()
            a = self.expr()
            self.take(":")
            b = self.expr()
            if a.sort != b.sort:
                raise self.error("branches of ?: differ in type")
            return E.ite(self.want(c, BOOL), a, b)
        return c

    def disj(self) -> Expr:
        xs = [self.conj()]
        while self.peek() in ("||", "or"):
            self.take()
            xs.append(self.conj())
        return E.or_(*(self.want(x, BOOL) for x in xs)) if len(xs) > 1 else xs[0]

    def conj(self) -> Expr:
        xs = [self.unary()]
        while self.peek() in ("&&", "and"):
            self.take()
            xs.append(self.unary())
        return E.and_(*(self.want(x, BOOL) for x in xs)) if len(xs) > 1 else xs[0]

    def unary(self) -> Expr:
        if self.peek() in ("!", "not"):
            self.take()
            return E.not_(self.want(self.unary(), BOOL))
        return self.comparison()

    def comparison(self) -> Expr:
        a = self.additive()
        op = self.peek()
        if op not in ("==", "!=", "<", "<=", ">", ">="):
            return a
        self.take()
        b = self.additive()
        if op in ("==", "!="):
            if a.sort != b.sort:
                raise self.error("comparison of different types")
            r = E.eq(a, b)
            return r if op == "==" else E.not_(r)
        a, b = self.want(a, INT), self.want(b, INT)
        return {"<": E.slt, "<=": E.sle, ">": E.sgt, ">=": E.sge}[op](a, b)

    def additive(self) -> Expr:
        a = self.atom()
        while self.peek() in ("+", "-"):
            op = self.take()[1]
            b = self.want(self.atom(), INT)
            a = (E.add if op == "+" else E.sub)(self.want(a, INT), b)
        return a

    def want(self, e: Expr, sort) -> Expr:
        if e.sort != sort:
            raise self.error(f"expected {sort.kind} operand")
        return e

    def atom(self) -> Expr:
        kind, text = self.take()
        if kind == "num":
            return E.intc(int(text))
        if kind == "char":
            return E.intc(ord(_unescape(text[1:-1])))
        if kind == "str":
            return E.str_literal(_unescape(text[1:-1]))
        if text == "-":
            return E.neg(self.want(self.atom(), INT))
        if text == "(":
            e = self.expr()
            self.take(")")
            return e
        if kind != "name":
            raise self.error(f"unexpected {text!r}")
        if text in ("true", "false"):
            return E.TRUE if text == "true" else E.FALSE
        if self.peek() == "(":
            return self.call(text)
        if text not in self.names:
            raise self.error(f"undeclared name {text!r}")
        return self.names[text]

    def call(self, fn: str) -> Expr:
        self.take("(")
        args = []
        if self.peek() != ")":
            args.append(self.expr())
            while self.peek() == ",":
                self.take()
                args.append(self.expr())
        self.take(")")
        S, I = STRING, INT
        sigs = {"len": [S], "charat": [S, I], "indexof": [S, I, I], "equals": [S, S],
                "startswith": [S, S], "concat": [S, S], "substring": [S, I, I],
                "insert": [S, S, I], "of_int": [I]}
        if fn == "indexof" and len(args) == 2:
            args.append(E.intc(0))
        if fn == "substring" and len(args) == 2:
            args.append(E.strlen(self.want(args[0], S)))
        if fn not in sigs:
            raise self.error(f"unsupported operation {fn!r}")
        if len(args) != len(sigs[fn]):
            raise self.error(f"{fn} takes {len(sigs[fn])} arguments")
        args = [self.want(a, s) for a, s in zip(args, sigs[fn])]
        if fn == "len":
            return E.strlen(args[0])
        if fn == "charat":
            return E.zext(E.strchar(args[0], args[1]), 32)
        if fn == "substring":
            s, b, e = args
            self.premises.append(E.and_(E.sle(E.intc(0), b), E.sle(b, e), E.sle(e, E.strlen(s))))
        if fn == "insert":
            s, _, off = args
            self.premises.append(E.and_(E.sle(E.intc(0), off), E.sle(off, E.strlen(s))))
        return E.sapp(fn, *args)


@dataclass
class ScProblem:
    variables: list[Expr]
    constraints: list[Expr]


def parse_sc(text: str) -> ScProblem:
    names: dict[str, Expr] = {}
    variables: list[Expr] = []
    constraints: list[Expr] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = _tokenize(line, lineno)
        head = toks[0][1]
        premises: list[Expr] = []
        p = _ScParser(toks, lineno, names, premises)
        if head in ("string", "int"):
            p.take()
            while True:
                kind, name = p.take()
                if kind != "name":
                    raise p.error(f"bad name {name!r}")
                if name in names:
                    raise p.error(f"{name!r} declared twice")
                v = E.sym(name, STRING if head == "string" else INT)
                names[name] = v
                variables.append(v)
                if p.peek() is None:
                    break
                p.take(",")
        elif head == "assert":
            p.take()
            c = p.want(p.expr(), BOOL)
            p.done()
            constraints.extend(premises)
            constraints.append(c)
        elif len(toks) > 1 and toks[1][1] == "=":
            if head not in names:
                raise p.error(f"undeclared name {head!r}")
            p.take()
            p.take("=")
            rhs = p.expr()
            p.done()
            if rhs.sort != names[head].sort:
                raise p.error("definition of different type")
            constraints.extend(premises)
            constraints.append(E.eq(names[head], rhs))
        else:
            raise p.error(f"expected a declaration, definition or assert")
    return ScProblem(variables, constraints)


def solve_sc(text: str, max_string_length: int = 16) -> StringResult:
    prob = parse_sc(text)
    return solve_constraints(prob.constraints, prob.variables, max_string_length)


def quote(text: str) -> str:
    out = []
    for ch in text:
        v = ord(ch)
        if ch in "\"\\":
            out.append("\\" + ch)
        elif 32 <= v < 127:
            out.append(ch)
        else:
            out.append(f"\\u{v:04x}")
    return '"' + "".join(out) + '"'


def format_result(res: StringResult) -> str:
    if not res.sat:
        return "UNSAT"
    lines = ["SAT"]
    for name, v in res.model.items():
        lines.append(f"{name} = {quote(v) if isinstance(v, str) else v}")
    return "\n".join(lines)
