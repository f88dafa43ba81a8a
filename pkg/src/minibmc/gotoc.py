"""GOTO conversion: stack bytecode to guarded-goto register code, plus lowerings.

Pipeline (see :func:`build_goto`)::

    convert -> lower_virtual -> instrument -> lower_exceptions

``instrument`` runs before exception lowering so that implicit runtime
exceptions are expressed as ordinary ``Throw`` instructions and share the
dispatch code generated for explicit ``athrow``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable

from . import expr as E
from .checks import (CheckSpec, PropertyInfo, back_edges, instruction_checks, is_property,
                     property_table, uncaught_property)
from .expr import BOOL, INT, NULL, REF, STRING, Expr
from .frontend import ClassModel, MethodDef

THROWN = E.sym("@thrown", REF)
START = "__start"


class ConversionError(Exception):
    pass


# ------------------------------------------------------------ GOTO-level exprs

def sort_of(t: str) -> E.Sort:
    if t == "int":
        return INT
    if t == "string":
        return STRING
    return REF


def field_(obj: Expr, cls: str, fname: str, sort: E.Sort) -> Expr:
    return E._mk("field", (obj,), sort, (cls, fname))


def alen(arr: Expr) -> Expr:
    return E._mk("alen", (arr,), INT)


def aread(arr: Expr, idx: Expr) -> Expr:
    return E._mk("aread", (arr, idx), INT)


def classid(obj: Expr) -> Expr:
    return E._mk("classid", (obj,), INT)


def new_(cls: str) -> Expr:
    return E._mk("new", (), REF, cls)


def newarray(n: Expr) -> Expr:
    return E._mk("newarray", (n,), REF)


def nondet(type_: str, may_be_null: bool = True) -> Expr:
    return E._mk("nondet", (), sort_of(type_), (type_, may_be_null))


def int_of_bool(b: Expr) -> Expr:
    return E.ite(b, E.intc(1), E.intc(0))


# ------------------------------------------------------------------ the IR

@dataclass(frozen=True)
class Loc:
    function: str
    bytecode_index: int | None = None
    line: int | None = None
    file: str = ""


@dataclass
class Instr:
    loc: Loc
    labels: list = field(default_factory=list, kw_only=True)


@dataclass
class Assign(Instr):
    lhs: Expr
    rhs: Expr


@dataclass
class Goto(Instr):
    target: str
    guard: Expr
    back: bool = False          # loop back-edge of the source bytecode
    loop_id: int | None = None  # bytecode index of the back-edge


@dataclass
class Assert(Instr):
    cond: Expr
    prop: PropertyInfo


@dataclass
class Assume(Instr):
    cond: Expr


@dataclass
class Call(Instr):
    func: str
    args: list
    lhs: Expr | None


@dataclass
class Return(Instr):
    value: Expr | None


@dataclass
class Decl(Instr):
    var: Expr


@dataclass
class Dead(Instr):
    var: Expr


@dataclass
class Skip(Instr):
    pass


@dataclass
class VCall(Instr):
    cls: str
    method: str
    args: list       # receiver first
    lhs: Expr | None


@dataclass
class Throw(Instr):
    value: Expr


@dataclass
class SiteCheck:
    spec: CheckSpec
    cond: Expr
    prop: PropertyInfo | None


@dataclass
class GotoFunction:
    name: str
    params: list
    ret: Expr | None
    body: list
    method: MethodDef | None = None
    checks: dict = field(default_factory=dict)   # bytecode index -> [SiteCheck]
    end_label: str = "@end"

    def label_index(self) -> dict[str, int]:
        out = {}
        for i, ins in enumerate(self.body):
            for lbl in ins.labels:
                out[lbl] = i
        out.setdefault(self.end_label, len(self.body))
        return out


@dataclass
class GotoProgram:
    model: ClassModel
    functions: dict
    class_ids: dict
    properties: list = field(default_factory=list)
    entry: str | None = None
    lowered: bool = False

    def class_name(self, cid: int) -> str:
        for name, v in self.class_ids.items():
            if v == cid:
                return name
        return f"<class {cid}>"


@dataclass(frozen=True)
class GotoOptions:
    throw_runtime: bool = False
    check_overflow: bool = False


# ------------------------------------------------------------------ convert

def _local(m: MethodDef, slot: int, t: str) -> Expr:
    kind = m.local_types[slot]
    name = m.local_name(slot)
    sort = sort_of(t if t in ("int", "string") else "ref")
    if kind == "mixed":
        name += "$" + ("i" if sort == INT else "s" if sort == STRING else "r")
    return E.sym(f"{m.qualname}::{name}", sort)


def _temp(m: MethodDef, depth: int, t: str) -> Expr:
    sort = sort_of(t if t in ("int", "string") else "ref")
    suffix = "i" if sort == INT else "s" if sort == STRING else "r"
    return E.sym(f"{m.qualname}::$stack{depth}{suffix}", sort)


def _params(m: MethodDef) -> list[Expr]:
    return [_local(m, i, t) for i, t in enumerate(m.arg_types)]


def _ret_var(m: MethodDef) -> Expr | None:
    return E.sym(f"{m.qualname}::#return", sort_of(m.ret)) if m.ret else None


def _overflow_ok(op: str, a: Expr, b: Expr | None) -> Expr:
    if op == "neg":
        return E.ne(a, E.intc(-(1 << 31)))
    w = 64 if op == "mul" else 33
    fn = {"add": E.add, "sub": E.sub, "mul": E.mul}[op]
    exact = fn(E.sext(a, w), E.sext(b, w))
    return E.eq(E.sext(fn(a, b), w), exact)


def convert(model: ClassModel, opts: GotoOptions = GotoOptions()) -> GotoProgram:
    """Translate every method to a pre-lowering GOTO function."""
    class_ids = {c.name: i + 1 for i, c in enumerate(model.classes)}
    funcs = {}
    for c in model.classes:
        for m in c.methods:
            funcs[m.qualname] = _convert_method(model, m, opts)
    return GotoProgram(model, funcs, class_ids)


def _convert_method(model: ClassModel, m: MethodDef, opts: GotoOptions) -> GotoFunction:
    file = model.cls(m.cls).file
    lm = m.label_map
    props = property_table(model, m, opts.throw_runtime, opts.check_overflow)
    loops = set(back_edges(m))
    body: list[Instr] = []
    checks: dict[int, list[SiteCheck]] = {}
    fn = GotoFunction(m.qualname, _params(m), _ret_var(m), body, m, checks)

    for k, ins in enumerate(m.body):
        loc = Loc(m.qualname, k, ins.line, file)
        frame = m.frames[k]
        start = len(body)
        if frame is None:
            body.append(Skip(loc))
            body[start].labels.append(f"@{k}")
            continue
        stack, _locals = frame
        d = len(stack)
        nxt_frame = m.frames[k + 1] if k + 1 < len(m.frames) else None

        def T(depth: int, t: str | None = None) -> Expr:
            if t is None:
                t = stack[depth] if depth < d else nxt_frame[0][depth]
            return _temp(m, depth, t)

        op = ins.opcode
        emit = body.append
        site: list[tuple[Expr, int]] = []   # (condition, position in check list)
        if op == "const":
            emit(Assign(loc, T(d, "int"), E.intc(ins.operands[0])))
        elif op == "sconst":
            emit(Assign(loc, T(d, "string"), E.str_literal(ins.operands[0])))
        elif op == "null":
            emit(Assign(loc, T(d, "ref"), NULL))
        elif op == "load":
            slot = ins.operands[0]
            t = _locals[slot]
            emit(Assign(loc, T(d, t), _local(m, slot, t)))
        elif op == "store":
            slot = ins.operands[0]
            t = stack[-1]
            emit(Assign(loc, _local(m, slot, t), T(d - 1)))
        elif op == "dup":
            emit(Assign(loc, T(d, stack[-1]), T(d - 1)))
        elif op == "pop":
            emit(Skip(loc))
        elif op in ("add", "sub", "mul", "div", "rem"):
            a, b = T(d - 2), T(d - 1)
            if op in ("div", "rem"):
                site.append((E.ne(b, E.intc(0)), 0))
                rhs = (E.sdiv if op == "div" else E.srem)(a, b)
            else:
                if opts.check_overflow:
                    site.append((_overflow_ok(op, a, b), 0))
                rhs = {"add": E.add, "sub": E.sub, "mul": E.mul}[op](a, b)
            emit(Assign(loc, a, rhs))
        elif op == "neg":
            a = T(d - 1)
            if opts.check_overflow:
                site.append((_overflow_ok("neg", a, None), 0))
            emit(Assign(loc, a, E.neg(a)))
        elif op.startswith("if_"):
            a, b = T(d - 2), T(d - 1)
            cmp = {"if_eq": E.eq, "if_ne": E.ne, "if_lt": E.slt, "if_le": E.sle,
                   "if_gt": E.sgt, "if_ge": E.sge}[op](a, b)
            target = lm[ins.operands[0]]
            emit(Goto(loc, f"@{target}", cmp, k in loops, k if k in loops else None))
        elif op == "goto":
            target = lm[ins.operands[0]]
            emit(Goto(loc, f"@{target}", E.TRUE, k in loops, k if k in loops else None))
        elif op == "new":
            emit(Assign(loc, T(d, "ref"), new_(ins.operands[0])))
        elif op == "getfield":
            c, f = ins.operands[0].split(".")
            decl, ftype = model.lookup_field(c, f)
            obj = T(d - 1)
            site.append((E.ne(obj, NULL), 0))
            emit(Assign(loc, T(d - 1, ftype), field_(obj, decl, f, sort_of(ftype))))
        elif op == "putfield":
            c, f = ins.operands[0].split(".")
            decl, ftype = model.lookup_field(c, f)
            obj, val = T(d - 2), T(d - 1)
            site.append((E.ne(obj, NULL), 0))
            emit(Assign(loc, field_(obj, decl, f, sort_of(ftype)), val))
        elif op in ("invokestatic", "invokevirtual"):
            c, mn = ins.operands[0].split(".")
            target = model.lookup_method(c, mn)
            nargs = len(target.params) + (op == "invokevirtual")
            args = [T(i) for i in range(d - nargs, d)]
            lhs = T(d - nargs, target.ret) if target.ret else None
            if op == "invokestatic":
                emit(Call(loc, target.qualname, args, lhs))
            else:
                site.append((E.ne(args[0], NULL), 0))
                emit(VCall(loc, c, mn, args, lhs))
        elif op == "return":
            emit(Return(loc, T(d - 1) if m.ret else None))
        elif op == "newarray":
            n = T(d - 1)
            site.append((E.sle(E.intc(0), n), 0))
            emit(Assign(loc, T(d - 1, "int[]"), newarray(n)))
        elif op in ("aload", "astore"):
            base = d - 2 if op == "aload" else d - 3
            arr, idx = T(base), T(base + 1)
            site.append((E.ne(arr, NULL), 0))
            site.append((E.and_(E.sle(E.intc(0), idx), E.slt(idx, alen(arr))), 1))
            if op == "aload":
                emit(Assign(loc, T(base, "int"), aread(arr, idx)))
            else:
                emit(Assign(loc, aread(arr, idx), T(d - 1)))
        elif op == "arraylength":
            arr = T(d - 1)
            site.append((E.ne(arr, NULL), 0))
            emit(Assign(loc, T(d - 1, "int"), alen(arr)))
        elif op == "athrow":
            v = T(d - 1)
            site.append((E.ne(v, NULL), 0))
            emit(Throw(loc, v))
        elif op == "assert":
            site.append((E.ne(T(d - 1), E.intc(0)), 0))
            emit(Skip(loc))
        elif op == "assume":
            emit(Assume(loc, E.ne(T(d - 1), E.intc(0))))
        elif op == "nondet_int":
            emit(Assign(loc, T(d, "int"), nondet("int")))
        elif op == "nondet_string":
            emit(Assign(loc, T(d, "string"), nondet("string")))
        elif op == "s_len":
            emit(Assign(loc, T(d - 1, "int"), E.strlen(T(d - 1))))
        elif op == "s_charat":
            s, i = T(d - 2), T(d - 1)
            site.append((E.and_(E.sle(E.intc(0), i), E.slt(i, E.strlen(s))), 0))
            emit(Assign(loc, T(d - 2, "int"), E.zext(E.strchar(s, i), 32)))
        elif op == "s_indexof":
            s, c, frm = T(d - 3), T(d - 2), T(d - 1)
            emit(Assign(loc, T(d - 3, "int"), E.sapp("indexof", s, c, frm)))
        elif op == "s_substring":
            s, b, e = T(d - 3), T(d - 2), T(d - 1)
            site.append((E.and_(E.sle(E.intc(0), b), E.sle(b, e), E.sle(e, E.strlen(s))), 0))
            emit(Assign(loc, T(d - 3, "string"), E.sapp("substring", s, b, e)))
        elif op == "s_concat":
            a, b = T(d - 2), T(d - 1)
            emit(Assign(loc, T(d - 2, "string"), E.sapp("concat", a, b)))
        elif op in ("s_equals", "s_startswith"):
            a, b = T(d - 2), T(d - 1)
            kind = "equals" if op == "s_equals" else "startswith"
            emit(Assign(loc, T(d - 2, "int"), int_of_bool(E.sapp(kind, a, b))))
        elif op == "s_insert":
            s, t, off = T(d - 3), T(d - 2), T(d - 1)
            site.append((E.and_(E.sle(E.intc(0), off), E.sle(off, E.strlen(s))), 0))
            emit(Assign(loc, T(d - 3, "string"), E.sapp("insert", s, t, off)))
        elif op == "s_of_int":
            emit(Assign(loc, T(d - 1, "string"), E.sapp("of_int", T(d - 1))))
        else:  # pragma: no cover
            raise ConversionError(f"unknown opcode {op}")

        specs = instruction_checks(op, opts.check_overflow)
        if site:
            checks[k] = [SiteCheck(specs[pos], cond, props.get((k, pos))) for cond, pos in site]
        body[start].labels.append(f"@{k}")
    end = Skip(Loc(m.qualname, len(m.body), m.body[-1].line if m.body else None, file))
    end.labels.append(f"@{len(m.body)}")
    body.append(end)
    return fn


# ------------------------------------------------------------ lower_virtual

def dispatch_order(model: ClassModel, cls: str) -> list[str]:
    """Subclasses of cls, most-derived first, ties by declaration order."""
    subs = model.subclasses(cls)
    depth = {c: len(model.superclasses(c)) for c in subs}
    decl = {c.name: i for i, c in enumerate(model.classes)}
    return sorted(subs, key=lambda c: (-depth[c], decl[c]))


def lower_virtual(prog: GotoProgram, model: ClassModel | None = None) -> GotoProgram:
    model = model or prog.model
    counter = 0
    for fn in prog.functions.values():
        out: list[Instr] = []
        for ins in fn.body:
            if not isinstance(ins, VCall):
                out.append(ins)
                continue
            counter += 1
            recv = ins.args[0]
            cases = []
            for d in dispatch_order(model, ins.cls):
                impl = model.find_method(d, ins.method)
                if impl is None:
                    raise ConversionError(f"no implementation of {ins.cls}.{ins.method} for class {d}")
                cases.append((d, impl.qualname))
            join = f"$vjoin{counter}"
            first = len(out)
            for i, (d, _) in enumerate(cases[:-1]):
                out.append(Goto(ins.loc, f"$vcase{counter}_{i}", E.eq(classid(recv), E.intc(prog.class_ids[d]))))
            for i, (d, target) in enumerate(reversed(cases)):
                idx = len(cases) - 1 - i
                call = Call(ins.loc, target, list(ins.args), ins.lhs)
                if idx < len(cases) - 1:
                    call.labels.append(f"$vcase{counter}_{idx}")
                out.append(call)
                out.append(Goto(ins.loc, join, E.TRUE))
            out[-1] = Skip(ins.loc)
            out[-1].labels.append(join)
            out[first].labels[:0] = ins.labels
        fn.body = out
    return prog


# ---------------------------------------------------------------- instrument

def instrument(prog: GotoProgram, throw_runtime: bool = False) -> GotoProgram:
    """Insert the recorded per-instruction checks before each instruction."""
    counter = 0
    for fn in prog.functions.values():
        out: list[Instr] = []
        done: set[int] = set()
        for ins in fn.body:
            k = ins.loc.bytecode_index
            if k is not None and k in fn.checks and k not in done and ins.loc.function == fn.name:
                done.add(k)
                first = len(out)
                for chk in fn.checks[k]:
                    if throw_runtime and chk.spec.exc_class is not None:
                        counter += 1
                        ok = f"$chk{counter}"
                        out.append(Goto(ins.loc, ok, chk.cond))
                        out.append(Throw(ins.loc, new_(chk.spec.exc_class)))
                        skip = Skip(ins.loc)
                        skip.labels.append(ok)
                        out.append(skip)
                    else:
                        out.append(Assert(ins.loc, chk.cond, chk.prop))
                if len(out) > first:
                    out[first].labels[:0] = ins.labels
                    ins = replace(ins, labels=[])
            out.append(ins)
        fn.body = out
    return prog


# --------------------------------------------------------- lower_exceptions

def subtype_test(prog: GotoProgram, cid: Expr, cls: str) -> Expr:
    return E.or_(*(E.eq(cid, E.intc(prog.class_ids[d])) for d in prog.model.subclasses(cls)))


def lower_exceptions(prog: GotoProgram, model: ClassModel | None = None,
                     throw_runtime: bool = False) -> GotoProgram:
    model = model or prog.model
    throwing = throwing_functions(prog)
    counter = 0
    for fn in prog.functions.values():
        m = fn.method
        table = m.handler_ranges() if m else []
        out: list[Instr] = []

        def dispatch(loc: Loc) -> list[Instr]:
            nonlocal counter
            code: list[Instr] = []
            k = loc.bytecode_index
            handlers = [(h, c) for lo, hi, h, c in table if k is not None and lo <= k < hi]
            tails: list[Instr] = []
            for h, c in handlers:
                counter += 1
                lbl = f"$catch{counter}"
                code.append(Goto(loc, lbl, subtype_test(prog, classid(THROWN), c)))
                slot0 = _temp(m, 0, c)
                a = Assign(loc, slot0, THROWN)
                a.labels.append(lbl)
                tails += [a, Assign(loc, THROWN, NULL), Goto(loc, f"@{h}", E.TRUE)]
            code.append(Goto(loc, fn.end_label, E.TRUE))
            return code + tails

        for ins in fn.body:
            if isinstance(ins, Throw):
                repl = [Assign(ins.loc, THROWN, ins.value)] + dispatch(ins.loc)
                repl[0].labels[:0] = ins.labels
                out.extend(repl)
            elif isinstance(ins, Call) and ins.func in throwing:
                out.append(ins)
                counter += 1
                ok = f"$nothrow{counter}"
                out.append(Goto(ins.loc, ok, E.eq(THROWN, NULL)))
                out.extend(dispatch(ins.loc))
                s = Skip(ins.loc)
                s.labels.append(ok)
                out.append(s)
            else:
                out.append(ins)
        fn.body = out
    return prog


def throwing_functions(prog: GotoProgram) -> set[str]:
    """Functions that may let an exception escape (least fixpoint over calls)."""
    out = {f for f, fn in prog.functions.items() if any(isinstance(i, Throw) for i in fn.body)}
    changed = True
    while changed:
        changed = False
        for f, fn in prog.functions.items():
            if f not in out and any(isinstance(i, Call) and i.func in out for i in fn.body):
                out.add(f)
                changed = True
    return out


# --------------------------------------------------------------- the driver

def build_goto(model: ClassModel, entry: MethodDef, opts: GotoOptions = GotoOptions()) -> GotoProgram:
    """Convert, lower and instrument, and add the ``__start`` harness for ``entry``."""
    prog = convert(model, opts)
    lower_virtual(prog, model)
    instrument(prog, opts.throw_runtime)
    # the harness is added before exception lowering so its call gets a throw check
    file = model.cls(entry.cls).file
    line = entry.body[0].line if entry.body else None
    loc = Loc(START, None, line, file)
    body: list[Instr] = [Assign(loc, THROWN, NULL)]
    args = []
    for slot, t in enumerate(entry.arg_types):
        v = E.sym(f"{START}::{entry.local_name(slot)}", sort_of(t))
        is_this = slot == 0 and not entry.static
        body.append(Assign(loc, v, nondet(t, may_be_null=not is_this)))
        args.append(v)
    ret = E.sym(f"{START}::return", sort_of(entry.ret)) if entry.ret else None
    body.append(Call(loc, entry.qualname, args, ret))
    prog.functions[START] = GotoFunction(START, [], None, body)
    escapes = entry.qualname in throwing_functions(prog)
    lower_exceptions(prog, model, opts.throw_runtime)
    start = prog.functions[START]
    # an exception escaping the entry jumps to the end label, which must precede the check
    start.body.append(Skip(loc, labels=[start.end_label]))
    if escapes:
        start.body.append(Assert(loc, E.eq(THROWN, NULL), uncaught_property(model, entry)))
    start.body.append(Skip(loc))
    prog.entry = START
    prog.lowered = True
    prog.properties = all_properties(prog)
    return prog


def reachable_functions(prog: GotoProgram, root: str = START) -> list[str]:
    seen: list[str] = []
    todo = [root]
    while todo:
        f = todo.pop()
        if f in seen or f not in prog.functions:
            continue
        seen.append(f)
        for ins in prog.functions[f].body:
            if isinstance(ins, Call):
                todo.append(ins.func)
    return seen


def all_properties(prog: GotoProgram) -> list[PropertyInfo]:
    """Properties asserted in functions reachable from the harness."""
    out = {}
    for f in reachable_functions(prog):
        for ins in prog.functions[f].body:
            if isinstance(ins, Assert):
                out[ins.prop.pid] = ins.prop
    return list(out.values())


# ------------------------------------------------------------------- show

def format_instr(ins: Instr, labels: dict[str, int] | None = None) -> str:
    def tgt(lbl: str) -> str:
        return str(labels[lbl]) if labels and lbl in labels else lbl

    if isinstance(ins, Assign):
        return f"ASSIGN {show_expr(ins.lhs)} := {show_expr(ins.rhs)}"
    if isinstance(ins, Goto):
        g = "" if ins.guard is E.TRUE else f"IF {show_expr(ins.guard)} THEN "
        return f"{g}GOTO {tgt(ins.target)}" + (" (loop)" if ins.back else "")
    if isinstance(ins, Assert):
        return f"ASSERT {show_expr(ins.cond)} // {ins.prop.pid}"
    if isinstance(ins, Assume):
        return f"ASSUME {show_expr(ins.cond)}"
    if isinstance(ins, Call):
        lhs = f"{show_expr(ins.lhs)} := " if ins.lhs is not None else ""
        return f"CALL {lhs}{ins.func}({', '.join(show_expr(a) for a in ins.args)})"
    if isinstance(ins, Return):
        return "RETURN" + (f" {show_expr(ins.value)}" if ins.value is not None else "")
    if isinstance(ins, VCall):
        return f"VCALL {ins.cls}.{ins.method}({', '.join(show_expr(a) for a in ins.args)})"
    if isinstance(ins, Throw):
        return f"THROW {show_expr(ins.value)}"
    if isinstance(ins, Decl):
        return f"DECL {show_expr(ins.var)}"
    if isinstance(ins, Dead):
        return f"DEAD {show_expr(ins.var)}"
    return "SKIP"


def show_expr(e: Expr) -> str:
    if e.op == "field":
        return f"{show_expr(e.args[0])}.{e.val[1]}"
    if e.op == "alen":
        return f"{show_expr(e.args[0])}.length"
    if e.op == "aread":
        return f"{show_expr(e.args[0])}[{show_expr(e.args[1])}]"
    if e.op == "classid":
        return f"{show_expr(e.args[0])}.@class_identifier"
    if e.op == "new":
        return f"new {e.val}"
    if e.op == "newarray":
        return f"new int[{show_expr(e.args[0])}]"
    if e.op == "nondet":
        return f"nondet({e.val[0]})"
    if e.op == "sym":
        return e.val.split("::", 1)[-1]
    if not e.args:
        return E.to_str(e)
    # rebuild with shortened names
    inner = E.to_str(e)
    for s in E.symbols(e):
        inner = inner.replace(s.val, s.val.split("::", 1)[-1])
    return inner


def show_goto(prog: GotoProgram) -> str:
    lines = []
    for name in reachable_functions(prog):
        fn = prog.functions[name]
        labels = fn.label_index()
        lines.append(f"{name} /* {', '.join(show_expr(p) for p in fn.params)} */")
        for i, ins in enumerate(fn.body):
            where = f"line {ins.loc.line}" if ins.loc.line is not None else ""
            lines.append(f"  {i:4d}: {format_instr(ins, labels)}" + (f"  // {where}" if where else ""))
        lines.append("")
    return "\n".join(lines)
