"""Symbolic execution of a lowered GOTO program into an SSA system.

States carry a path guard (a tuple of conjuncts), the current value of every
variable and per-loop back-edge counters.  Values of int, string and array
variables are SSA symbols (or constants, which are propagated); reference
values are propagated as expressions over object ids so that the objects a
reference may point to can be read off syntactically.

States that reach the same instruction with the same live loop counters are
merged; differing values become ``ite`` phi definitions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from . import expr as E
from .checks import PropertyInfo, loop_regions, recursion_property, unwind_property
from .expr import ARRAY, BOOL, INT, NULL, REF, STRING, Expr
from .gotoc import (START, THROWN, Assert, Assign, Assume, Call, Dead, Decl, GotoFunction,
                    GotoProgram, Goto, Loc, Return, Skip, show_expr)
from .options import Options


class SymexError(Exception):
    pass


@dataclass
class DynamicObject:
    id: int
    cls: str                    # class name, or "int[]"
    loc: Loc | None
    fields: tuple = ()          # ((decl class, field), display name, sort)

    @property
    def name(self) -> str:
        return f"dynamic_object{self.id}"


@dataclass
class SsaStep:
    kind: str                   # assign | input | alloc | phi | constraint
    guard: Expr
    lhs: Expr | None            # SSA symbol defined (None for propagated values)
    value: Expr                 # expression whose model value is the assigned value
    cond: Expr                  # constraint contributed to the VC (TRUE if none)
    loc: Loc | None
    name: str = ""              # display name for traces
    hidden: bool = False
    nondet: Expr | None = None  # the fresh nondet symbol consumed here, if any


@dataclass
class PropertyInstance:
    info: PropertyInfo
    guard: Expr
    claim: Expr
    step: int                   # number of SSA steps emitted before this instance


@dataclass
class SsaSystem:
    steps: list = field(default_factory=list)
    properties: list = field(default_factory=list)       # PropertyInstance, program order
    symbols: dict = field(default_factory=dict)          # SSA name -> sort
    objects: list = field(default_factory=list)          # DynamicObject registry
    inputs: list = field(default_factory=list)           # (display name, type, value expr, nondet syms)
    class_ids: dict = field(default_factory=dict)
    max_string_length: int = 16
    max_array_length: int = 16
    max_nondet_string_length: int = 16

    @property
    def constraints(self) -> list[Expr]:
        return [s.cond for s in self.steps if s.cond is not E.TRUE]

    def property_ids(self) -> list[str]:
        seen: dict[str, PropertyInfo] = {}
        for p in self.properties:
            seen.setdefault(p.info.pid, p.info)
        return list(seen)

    def infos(self) -> dict[str, PropertyInfo]:
        out: dict[str, PropertyInfo] = {}
        for p in self.properties:
            out.setdefault(p.info.pid, p.info)
        return out

    def instances(self, pid: str) -> list[PropertyInstance]:
        return [p for p in self.properties if p.info.pid == pid]


# ------------------------------------------------------------------ state

@dataclass
class State:
    guard: tuple                     # conjuncts
    values: dict                     # variable name -> Expr
    counters: dict                   # back-edge bytecode index -> times taken
    pc: int = 0

    def copy(self) -> "State":
        return State(self.guard, dict(self.values), dict(self.counters), self.pc)

    def guard_expr(self) -> Expr:
        return E.and_(*self.guard) if self.guard else E.TRUE

    def add_guard(self, c: Expr) -> None:
        if c is E.TRUE:
            return
        self.guard = self.guard + (c,)

    @property
    def dead(self) -> bool:
        return any(c is E.FALSE for c in self.guard)


def _common_prefix(a: tuple, b: tuple) -> int:
    n = 0
    for x, y in zip(a, b):
        if x is not y:
            break
        n += 1
    return n


# ------------------------------------------------------------------ engine

class Symex:
    def __init__(self, prog: GotoProgram, opts: Options):
        if opts.unwind < 1:
            raise SymexError("unwind bound must be at least 1")
        self.prog = prog
        self.opts = opts
        self.k = opts.unwind
        literals = tuple(e.val[1] for fn in prog.functions.values() for ins in fn.body
                         for e in _exprs(ins) for e in E.iter_dag(e)
                         if e.op == "sapp" and e.val[0] == "literal")
        self.max_string = opts.string_bound(literals)
        self.ssa = SsaSystem(class_ids=dict(prog.class_ids), max_string_length=self.max_string,
                             max_array_length=opts.max_array_length,
                             max_nondet_string_length=opts.max_nondet_string_length)
        self.versions: dict[str, int] = {}
        self.activations: dict[str, int] = {}
        self.stack: list[str] = []       # active functions
        self.nondets = 0
        self.model = prog.model
        self._regions: dict[str, dict] = {}

    # ---------------------------------------------------------- symbols
    def fresh(self, base: str, sort: E.Sort) -> Expr:
        n = self.versions.get(base, 0) + 1
        self.versions[base] = n
        name = f"{base}#{n}"
        self.ssa.symbols[name] = sort
        return E.sym(name, sort)

    def nondet_sym(self, sort: E.Sort) -> Expr:
        self.nondets += 1
        name = f"nondet#{self.nondets}"
        self.ssa.symbols[name] = sort
        return E.sym(name, sort)

    def emit(self, st: State, kind: str, lhs: Expr | None, value: Expr, cond: Expr,
             loc: Loc | None, name: str = "", hidden: bool = False, nondet: Expr | None = None) -> None:
        self.ssa.steps.append(SsaStep(kind, st.guard_expr(), lhs, value, cond, loc, name, hidden, nondet))

    # ---------------------------------------------------------- values
    def define(self, st: State, var: str, value: Expr, loc: Loc | None, display: str,
               hidden: bool, kind: str = "assign", nondet: Expr | None = None) -> None:
        """Assign ``value`` (already renamed) to ``var``."""
        if value.sort == STRING and value.op == "sapp" and value.val[0] == "literal" \
                and len(value.val[1]) > self.max_string:
            st.add_guard(E.FALSE)
            return
        if value.op in ("const", "sym") or value.sort == REF \
                or (value.sort == STRING and value.op == "sapp" and value.val[0] == "literal"):
            st.values[var] = value
            self.emit(st, kind, None, value, E.TRUE, loc, display, hidden, nondet)
            return
        lhs = self.fresh(var, value.sort)
        if value.sort == STRING:
            cond = E.implies(st.guard_expr(), E.eq(lhs, value))
        else:
            cond = E.eq(lhs, value)
        st.values[var] = lhs
        self.emit(st, kind, lhs, lhs, cond, loc, display, hidden, nondet)

    def read(self, st: State, name: str, sort: E.Sort) -> Expr:
        v = st.values.get(name)
        if v is None:
            # never assigned on this path (e.g. an input object's untouched state)
            v = self.fresh(name, sort)
            st.values[name] = v
        return v

    def rename(self, st: State, e: Expr, frame: str) -> Expr:
        """Replace GOTO variables by their current values and resolve heap accesses."""
        memo: dict[int, Expr] = {}

        def go(n: Expr) -> Expr:
            r = memo.get(id(n))
            if r is not None:
                return r
            op = n.op
            if op == "sym":
                r = self.read(st, self.var_name(n.val, frame), n.sort)
            elif op == "field":
                r = self.field_select(st, go(n.args[0]), n.val, n.sort)
            elif op == "alen":
                r = self.field_select(st, go(n.args[0]), ("int[]", "length"), INT)
            elif op == "aread":
                arr = self.field_select(st, go(n.args[0]), ("int[]", "data"), ARRAY)
                r = E.select(arr, go(n.args[1]))
            elif op == "classid":
                r = self.class_id(go(n.args[0]))
            elif op in ("new", "newarray", "nondet"):
                raise SymexError(f"{op} outside an assignment")
            elif not n.args:
                r = n
            else:
                args = tuple(go(a) for a in n.args)
                r = n if all(a is b for a, b in zip(args, n.args)) else E.rebuild(n, args)
            memo[id(n)] = r
            return r

        return go(e)

    def var_name(self, name: str, frame: str) -> str:
        """Level-1 renaming: function locals get the activation suffix."""
        if frame and name.startswith(frame.split("!")[0] + "::"):
            return f"{name}!{frame.split('!')[1]}"
        return name

    # ------------------------------------------------------------ heap
    def candidates(self, ref: Expr) -> list[DynamicObject]:
        ids = sorted({n.val for n in E.iter_dag(ref) if n.op == "const" and n.sort == REF and n.val})
        return [self.ssa.objects[i - 1] for i in ids]

    def field_key(self, obj: DynamicObject, key: tuple) -> str | None:
        for k, display, _ in obj.fields:
            if k == key or (key[0] == "int[]" and k[1] == key[1]):
                return display
        return None

    def field_select(self, st: State, ref: Expr, key: tuple, sort: E.Sort) -> Expr:
        cands = [(o, self.field_key(o, key)) for o in self.candidates(ref)]
        cands = [(o, f) for o, f in cands if f is not None]
        if not cands:
            return self.nondet_sym(sort)
        out = self.read(st, cands[-1][1], sort)
        for o, f in reversed(cands[:-1]):
            out = E.ite(E.eq(ref, E.const(o.id, REF)), self.read(st, f, sort), out)
        return out

    def class_id(self, ref: Expr) -> Expr:
        cands = self.candidates(ref)
        if not cands:
            return E.intc(0)
        out = E.intc(self.prog.class_ids.get(cands[-1].cls, 0))
        for o in reversed(cands[:-1]):
            out = E.ite(E.eq(ref, E.const(o.id, REF)), E.intc(self.prog.class_ids.get(o.cls, 0)), out)
        return out

    def field_store(self, st: State, ref: Expr, key: tuple, value: Expr, loc: Loc,
                    update=None) -> None:
        """obj.f := value for every object ref may denote (``update`` maps old -> new)."""
        cands = [(o, self.field_key(o, key)) for o in self.candidates(ref)]
        cands = [(o, f) for o, f in cands if f is not None]
        for o, f in cands:
            old = self.read(st, f, value.sort if update is None else ARRAY)
            new = value if update is None else update(old)
            if len(cands) > 1:
                new = E.ite(E.eq(ref, E.const(o.id, REF)), new, old)
            self.define(st, f, new, loc, f, hidden=False)

    def allocate(self, st: State, cls: str, loc: Loc | None, length: Expr | None = None,
                 data: Expr | None = None, defaults: bool = True) -> Expr:
        oid = len(self.ssa.objects) + 1
        name = f"dynamic_object{oid}"
        if cls == "int[]":
            fields = ((("int[]", "length"), f"{name}.length", INT), (("int[]", "data"), f"{name}.data", ARRAY))
        else:
            all_f = self.model.all_fields(cls)
            counts: dict[str, int] = {}
            for _, f, _ in all_f:
                counts[f] = counts.get(f, 0) + 1
            fields = tuple(((d, f), f"{name}.{f}" if counts[f] == 1 else f"{name}.{d}.{f}", _sort(t))
                           for d, f, t in all_f)
        obj = DynamicObject(oid, cls, loc, fields)
        self.ssa.objects.append(obj)
        self.emit(st, "alloc", None, E.intc(self.prog.class_ids.get(cls, 0)), E.TRUE, loc,
                  f"{name}.@class_identifier")
        if cls == "int[]":
            self.define(st, fields[0][1], length, loc, fields[0][1], hidden=False)
            self.define(st, fields[1][1], data, loc, fields[1][1], hidden=False)
        elif defaults:
            for _, display, sort in fields:
                init = E.str_literal("") if sort == STRING else E.const(0, sort)
                self.define(st, display, init, loc, display, hidden=False)
        return E.const(oid, REF)

    # --------------------------------------------------------- assignments
    def assign(self, st: State, ins: Assign, frame: str) -> None:
        lhs, rhs = ins.lhs, ins.rhs
        loc = ins.loc
        nondet = None
        if rhs.op in ("new", "newarray", "nondet"):
            value, nondet = self.side_effect(st, rhs, frame, loc)
            if st.dead:
                return
        else:
            value = self.rename(st, rhs, frame)
        if lhs.op == "sym":
            var = self.var_name(lhs.val, frame)
            kind = "input" if nondet is not None and frame == "" else "assign"
            self.define(st, var, value, loc, _display(lhs), hidden=_hidden(lhs.val),
                        kind=kind, nondet=nondet)
        elif lhs.op == "field":
            ref = self.rename(st, lhs.args[0], frame)
            self.field_store(st, ref, lhs.val, value, loc)
        elif lhs.op == "aread":
            ref = self.rename(st, lhs.args[0], frame)
            idx = self.rename(st, lhs.args[1], frame)
            self.field_store(st, ref, ("int[]", "data"), value, loc,
                             update=lambda old: E.store(old, idx, value))
        else:
            raise SymexError(f"cannot assign to {lhs.op}")

    def side_effect(self, st: State, rhs: Expr, frame: str, loc: Loc) -> tuple[Expr, Expr | None]:
        """Value of an allocating/nondet rhs and the nondet symbol it consumed."""
        if rhs.op == "new":
            return self.allocate(st, rhs.val, loc), None
        if rhs.op == "newarray":
            n = self.rename(st, rhs.args[0], frame)
            st.add_guard(E.sle(n, E.intc(self.opts.max_array_length)))
            return self.allocate(st, "int[]", loc, n, E.const(0, ARRAY)), None
        t, may_null = rhs.val
        return self.nondet_value(st, t, may_null, loc)

    def nondet_value(self, st: State, t: str, may_null: bool, loc: Loc | None) -> tuple[Expr, Expr | None]:
        if t == "int":
            v = self.nondet_sym(INT)
            return v, v
        if t == "string":
            v = self.nondet_sym(STRING)
            bound = E.sle(E.strlen(v), E.intc(self.opts.max_nondet_string_length))
            self.emit(st, "constraint", None, E.TRUE, bound, loc, hidden=True)
            return v, v
        if t == "int[]":
            n = self.nondet_sym(INT)
            data = self.nondet_sym(ARRAY)
            self.emit(st, "constraint", None, E.TRUE,
                      E.and_(E.sle(E.intc(0), n), E.sle(n, E.intc(self.opts.max_array_length))),
                      loc, hidden=True)
            obj = self.allocate(st, "int[]", loc, n, data)
        else:
            obj = self.allocate(st, t, loc)
        if not may_null or not self.opts.nondet_may_be_null:
            return obj, None
        b = self.nondet_sym(BOOL)
        return E.ite(b, NULL, obj), b

    # ---------------------------------------------------------- the driver
    def run(self, entry: str = START) -> SsaSystem:
        fn = self.prog.functions[entry]
        st = State((), {}, {})
        self.run_function(fn, st, [], is_start=True)
        return self.ssa

    def regions(self, fn: GotoFunction) -> dict:
        if fn.method is None:
            return {}
        if fn.name not in self._regions:
            self._regions[fn.name] = loop_regions(fn.method)
        return self._regions[fn.name]

    def run_function(self, fn: GotoFunction, st: State, args: list,
                     is_start: bool = False) -> tuple[State | None, str | None]:
        """Execute ``fn`` from ``st``; returns the merged end state and the return variable."""
        act = self.activations.get(fn.name, 0) + 1
        self.activations[fn.name] = act
        frame = f"{fn.name}!{act}" if not is_start else ""
        for p, a in zip(fn.params, args):
            self.define(st, self.var_name(p.val, frame), a, fn.body[0].loc if fn.body else None,
                        _display(p), hidden=False)
        self.stack.append(fn.name)
        labels = fn.label_index()
        regions = self.regions(fn)
        end = len(fn.body)
        pending: dict[tuple, State] = {}
        finished: list[State] = []

        def push(s: State, pc: int) -> None:
            if s.dead:
                return
            s.pc = pc
            if pc >= end:
                finished.append(s)
                return
            bidx = fn.body[pc].loc.bytecode_index
            if s.counters:
                s.counters = {b: c for b, c in s.counters.items()
                              if bidx is not None and regions[b] <= bidx <= b}
            key = (pc, tuple(sorted(s.counters.items())))
            if key in pending:
                pending[key] = self.merge(pending[key], s)
            else:
                pending[key] = s

        push(st, 0)
        while pending:
            key = min(pending, key=lambda kk: (kk[0], kk[1]))
            s = pending.pop(key)
            pc = key[0]
            ins = fn.body[pc]
            if isinstance(ins, Assign):
                self.assign(s, ins, frame)
                push(s, pc + 1)
            elif isinstance(ins, Goto):
                self.goto(s, ins, frame, fn, labels, push, pc)
            elif isinstance(ins, Assert):
                cond = self.rename(s, ins.cond, frame)
                self.ssa.properties.append(PropertyInstance(ins.prop, s.guard_expr(), cond,
                                                            len(self.ssa.steps)))
                s.add_guard(cond)
                push(s, pc + 1)
            elif isinstance(ins, Assume):
                s.add_guard(self.rename(s, ins.cond, frame))
                push(s, pc + 1)
            elif isinstance(ins, Call):
                self.call(s, ins, frame)
                push(s, pc + 1)
            elif isinstance(ins, Return):
                if ins.value is not None:
                    v = self.rename(s, ins.value, frame)
                    self.define(s, self.var_name(fn.ret.val, frame), v, ins.loc, "return", hidden=True)
                push(s, end)
            elif isinstance(ins, (Skip, Decl, Dead)):
                push(s, pc + 1)
            else:
                raise SymexError(f"unexpected instruction {type(ins).__name__} after lowering")
        self.stack.pop()
        ret_name = self.var_name(fn.ret.val, frame) if fn.ret is not None else ""
        if not finished:
            return None, ret_name
        out = finished[0]
        for s in finished[1:]:
            out = self.merge(out, s)
        return out, ret_name

    def goto(self, s: State, ins: Goto, frame: str, fn: GotoFunction, labels: dict, push, pc: int) -> None:
        cond = self.rename(s, ins.guard, frame)
        target = labels[ins.target]
        if cond is not E.TRUE:
            fall = s.copy()
            fall.add_guard(E.not_(cond))
            push(fall, pc + 1)
        if cond is E.FALSE:
            return
        taken = s
        taken.add_guard(cond)
        if taken.dead:
            return
        if ins.back:
            b = ins.loop_id
            count = taken.counters.get(b, 0) + 1
            if count >= self.k:
                self.cutoff(taken, unwind_property(self.model, fn.method, b))
                return
            taken.counters[b] = count
        push(taken, target)

    def cutoff(self, s: State, prop: PropertyInfo) -> None:
        if self.opts.unwinding_assertions:
            self.ssa.properties.append(PropertyInstance(prop, s.guard_expr(), E.FALSE, len(self.ssa.steps)))

    def call(self, s: State, ins: Call, frame: str) -> None:
        callee = self.prog.functions.get(ins.func)
        if callee is None:
            raise SymexError(f"call to unknown function {ins.func}")
        if callee.method is not None and self.stack.count(ins.func) >= self.k:
            self.cutoff(s, recursion_property(self.model, callee.method))
            s.add_guard(E.FALSE)
            return
        args = [self.rename(s, a, frame) for a in ins.args]
        inner = State(s.guard, s.values, {})
        result, ret_name = self.run_function(callee, inner, args)
        if result is None:
            s.add_guard(E.FALSE)
            return
        s.guard = result.guard
        s.values = result.values
        if ins.lhs is not None:
            rv = s.values.get(ret_name)
            if rv is None:      # every path through the callee threw
                rv = self.fresh(ret_name, callee.ret.sort)
            self.define(s, self.var_name(ins.lhs.val, frame), rv, ins.loc, _display(ins.lhs),
                        hidden=_hidden(ins.lhs.val))
        suffix = ret_name.rsplit("!", 1)[-1] if ret_name else None
        prefix = callee.name + "::"
        for var in [v for v in s.values if v.startswith(prefix) and v.rsplit("!", 1)[-1] == suffix]:
            del s.values[var]

    # -------------------------------------------------------------- merge
    def merge(self, a: State, b: State) -> State:
        if a.dead:
            return b
        if b.dead:
            return a
        n = _common_prefix(a.guard, b.guard)
        ra, rb = a.guard[n:], b.guard[n:]
        ga = E.and_(*ra) if ra else E.TRUE
        gb = E.and_(*rb) if rb else E.TRUE
        joined = E.or_(ga, gb)
        out = State(a.guard[:n] + ((joined,) if joined is not E.TRUE else ()), {}, dict(a.counters), a.pc)
        for var in a.values.keys() | b.values.keys():
            va, vb = a.values.get(var), b.values.get(var)
            if va is None or vb is None or va is vb:
                out.values[var] = va if vb is None else vb if va is None else va
                continue
            merged = E.ite(ga, va, vb)
            if merged.sort == REF or merged.op == "const":
                out.values[var] = merged
                continue
            lhs = self.fresh(var, merged.sort)
            cond = E.eq(lhs, merged)
            if merged.sort == STRING:
                cond = E.implies(out.guard_expr(), cond)
            self.ssa.steps.append(SsaStep("phi", out.guard_expr(), lhs, lhs, cond, None, var, True))
            out.values[var] = lhs
        return out


def _sort(t: str) -> E.Sort:
    if t == "int":
        return INT
    if t == "string":
        return STRING
    return REF


def _display(v: Expr) -> str:
    return show_expr(v)


def _hidden(name: str) -> bool:
    base = name.split("::", 1)[-1]
    return base.startswith("$") or base.startswith("#") or name.startswith("@")


def _exprs(ins) -> list[Expr]:
    out = []
    for attr in ("lhs", "rhs", "guard", "cond", "value"):
        v = getattr(ins, attr, None)
        if isinstance(v, Expr):
            out.append(v)
    for a in getattr(ins, "args", ()) or ():
        if isinstance(a, Expr):
            out.append(a)
    return out


# ---------------------------------------------------------------- public API

def unwind(prog: GotoProgram, opts: Options = Options(), entry: str = START) -> SsaSystem:
    """Symbolically execute ``prog`` from its harness up to the unwinding bound."""
    if entry not in prog.functions:
        raise SymexError(f"entry {entry!r} not found")
    return Symex(prog, opts).run(entry)


def violation(ssa: SsaSystem, pid: str) -> Expr:
    """Disjunction of guard and negated claim over every instance of ``pid``."""
    return E.or_(*(E.and_(p.guard, E.not_(p.claim)) for p in ssa.instances(pid)))


def build_vc(ssa: SsaSystem, pids: list[str] | None = None) -> Expr:
    """Constraints conjoined with the violation of any selected property."""
    pids = ssa.property_ids() if pids is None else pids
    bad = E.or_(*(violation(ssa, pid) for pid in pids)) if pids else E.FALSE
    return E.and_(*ssa.constraints, bad)


def show_vcc(ssa: SsaSystem) -> str:
    lines = []
    for i, c in enumerate(ssa.constraints, 1):
        lines.append(f"{{-{i}}} {E.to_str(c)}")
    for p in ssa.properties:
        lines.append(f"[{p.info.pid}] {E.to_str(p.guard)} => {E.to_str(p.claim)}")
    return "\n".join(lines)
