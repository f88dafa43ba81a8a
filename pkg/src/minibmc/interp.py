"""Concrete MJB interpreter: the ground truth for differential testing and replay.

Nondeterminism is resolved from a feed: entry parameters first (in order,
skipping ``this``), then one value per ``nondet_int``/``nondet_string`` in
execution order.  Loop bounding mirrors symex: a back-edge may be taken at
most ``unwind - 1`` times while control stays inside its loop region, and a
method may have at most ``unwind`` active frames.  Executions beyond the
bound are *pruned* (or violate an unwinding property when
``unwinding_assertions`` is on).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

from .checks import (instruction_checks, loop_regions, property_table, recursion_property,
                     uncaught_property, unwind_property)
from .expr import java_index_of
from .frontend import ClassModel, MethodDef
from .options import Options

INT_MIN, INT_MAX = -(1 << 31), (1 << 31) - 1


def wrap(v: int) -> int:
    return ((v + (1 << 31)) & 0xFFFFFFFF) - (1 << 31)


def java_div(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return wrap(-q if (a < 0) != (b < 0) else q)


def java_rem(a: int, b: int) -> int:
    r = abs(a) % abs(b)
    return -r if a < 0 else r


class FeedError(Exception):
    """The feed does not supply a value of the kind the program asks for."""


class FeedExhausted(FeedError):
    def __init__(self, kind: str):
        super().__init__(f"nondet feed exhausted (needed {kind})")
        self.kind = kind


def _feed_ok(kind: str, v: Any) -> bool:
    if kind == "int":
        return isinstance(v, int)
    if kind == "string":
        return isinstance(v, str)
    if kind == "int[]":
        return v is None or v is False or (isinstance(v, list) and all(isinstance(x, int) for x in v))
    return v is None or isinstance(v, (bool, int))


@dataclass(frozen=True)
class ExecOutcome:
    kind: str                     # returned | violated | uncaught | fuel_exhausted | pruned
    value: Any = None
    pid: str | None = None        # violated property (also set for uncaught exceptions)
    exc_class: str | None = None
    line: int | None = None
    steps: int = 0
    lines: frozenset = frozenset()  # (method, line) pairs executed

    @property
    def violated(self) -> bool:
        return self.kind in ("violated", "uncaught")

    def __str__(self) -> str:
        if self.kind == "returned":
            return f"returned {self.value!r}"
        if self.kind == "violated":
            return f"violated {self.pid} at line {self.line}"
        if self.kind == "uncaught":
            return f"uncaught {self.exc_class} ({self.pid})"
        return self.kind


@dataclass
class HeapObject:
    cls: str
    fields: dict = field(default_factory=dict)


@dataclass
class HeapArray:
    data: list


@dataclass
class Frame:
    method: MethodDef
    locals: list
    stack: list = field(default_factory=list)
    pc: int = 0
    counters: dict = field(default_factory=dict)


class _Stop(Exception):
    def __init__(self, outcome_kind: str, **kw):
        self.kind = outcome_kind
        self.kw = kw


def default_value(t: str) -> Any:
    if t == "int":
        return 0
    if t == "string":
        return ""
    return 0


class Interpreter:
    def __init__(self, model: ClassModel, opts: Options = Options()):
        self.model = model
        self.opts = opts
        literals = tuple(ins.operands[0] for c in model.classes for m in c.methods
                         for ins in m.body if ins.opcode == "sconst")
        self.max_string = opts.string_bound(literals)
        self._props: dict[str, dict] = {}
        self._regions: dict[str, dict] = {}

    # -------------------------------------------------------------- helpers
    def props(self, m: MethodDef) -> dict:
        if m.qualname not in self._props:
            self._props[m.qualname] = property_table(self.model, m, self.opts.throw_runtime,
                                                     self.opts.check_overflow)
        return self._props[m.qualname]

    def regions(self, m: MethodDef) -> dict:
        if m.qualname not in self._regions:
            self._regions[m.qualname] = loop_regions(m)
        return self._regions[m.qualname]

    def alloc(self, obj) -> int:
        self.heap.append(obj)
        return len(self.heap) - 1

    def new_object(self, cls: str) -> int:
        fields = {(d, f): default_value(t) for d, f, t in self.model.all_fields(cls)}
        return self.alloc(HeapObject(cls, fields))

    def string(self, s: str) -> str:
        if len(s) > self.max_string:
            raise _Stop("pruned")
        return s

    def take(self, kind: str) -> Any:
        if self.pos >= len(self.feed):
            raise FeedExhausted(kind)
        v = self.feed[self.pos]
        if not _feed_ok(kind, v):
            raise FeedError(f"feed value {self.pos} is {v!r}, expected {kind}")
        self.pos += 1
        return v

    def input_value(self, t: str, is_this: bool = False) -> Any:
        if is_this:
            return self.new_object(t)
        if t == "int":
            return wrap(int(self.take("int")))
        if t == "string":
            s = self.take("string")
            if len(s) > self.opts.max_nondet_string_length:
                raise _Stop("pruned")
            return self.string(s)
        v = self.take(t)
        if v is None or v is False or v == 0:
            if not self.opts.nondet_may_be_null:
                raise _Stop("pruned")
            return 0
        if t == "int[]":
            data = [wrap(int(x)) for x in v]
            if len(data) > self.opts.max_array_length:
                raise _Stop("pruned")
            return self.alloc(HeapArray(data))
        return self.new_object(t)

    def transfer(self, f: Frame, target: int) -> None:
        regions = self.regions(f.method)
        if f.counters:
            for b in list(f.counters):
                if not regions[b] <= target <= b:
                    del f.counters[b]
        f.pc = target

    def cutoff(self, prop) -> None:
        if self.opts.unwinding_assertions:
            raise _Stop("violated", pid=prop.pid, line=prop.line)
        raise _Stop("pruned")

    # ----------------------------------------------------------------- run
    def run(self, entry: MethodDef, feed: Sequence, fuel: int = 100_000) -> ExecOutcome:
        self.heap: list = [None]
        self.feed = list(feed)
        self.pos = 0
        self.steps = 0
        self.lines: set = set()
        self.entry = entry
        try:
            args = [self.input_value(t, is_this=(i == 0 and not entry.static))
                    for i, t in enumerate(entry.arg_types)]
            value = self._execute(entry, args, fuel)
            return ExecOutcome("returned", value, steps=self.steps, lines=frozenset(self.lines))
        except _Stop as s:
            return ExecOutcome(s.kind, steps=self.steps, lines=frozenset(self.lines), **s.kw)

    def _execute(self, entry: MethodDef, args: list, fuel: int) -> Any:
        model = self.model
        frames = [self._frame(entry, args)]
        k = self.opts.unwind
        while True:
            f = frames[-1]
            m = f.method
            if f.pc >= len(m.body):
                raise RuntimeError(f"{m.qualname}: fell off the end")  # the verifier rules this out
            ins = m.body[f.pc]
            self.steps += 1
            if self.steps > fuel:
                raise _Stop("fuel_exhausted")
            self.lines.add((m.qualname, ins.line))
            op = ins.opcode
            st = f.stack
            nxt = f.pc + 1
            thrown = None

            def fail(pos: int):
                spec = instruction_checks(op, self.opts.check_overflow)[pos]
                if self.opts.throw_runtime and spec.exc_class is not None:
                    return self.new_object(spec.exc_class)
                prop = self.props(m)[(f.pc, pos)]
                raise _Stop("violated", pid=prop.pid, line=prop.line)

            if op == "const":
                st.append(wrap(ins.operands[0]))
            elif op == "sconst":
                st.append(self.string(ins.operands[0]))
            elif op == "null":
                st.append(0)
            elif op == "load":
                st.append(f.locals[ins.operands[0]])
            elif op == "store":
                f.locals[ins.operands[0]] = st.pop()
            elif op == "dup":
                st.append(st[-1])
            elif op == "pop":
                st.pop()
            elif op in ("add", "sub", "mul"):
                b, a = st.pop(), st.pop()
                exact = a + b if op == "add" else a - b if op == "sub" else a * b
                if self.opts.check_overflow and not INT_MIN <= exact <= INT_MAX:
                    fail(0)
                st.append(wrap(exact))
            elif op in ("div", "rem"):
                b, a = st.pop(), st.pop()
                if b == 0:
                    thrown = fail(0)
                else:
                    st.append(java_div(a, b) if op == "div" else java_rem(a, b))
            elif op == "neg":
                a = st.pop()
                if self.opts.check_overflow and a == INT_MIN:
                    fail(0)
                st.append(wrap(-a))
            elif op.startswith("if_") or op == "goto":
                if op == "goto":
                    taken = True
                else:
                    b, a = st.pop(), st.pop()
                    taken = {"if_eq": a == b, "if_ne": a != b, "if_lt": a < b, "if_le": a <= b,
                             "if_gt": a > b, "if_ge": a >= b}[op]
                if taken:
                    target = m.label_map[ins.operands[0]]
                    if target <= f.pc:
                        count = f.counters.get(f.pc, 0) + 1
                        if count >= k:
                            self.cutoff(unwind_property(model, m, f.pc))
                        f.counters[f.pc] = count
                    nxt = target
            elif op == "new":
                st.append(self.new_object(ins.operands[0]))
            elif op in ("getfield", "putfield"):
                c, fn = ins.operands[0].split(".")
                decl, _ = model.lookup_field(c, fn)
                val = st.pop() if op == "putfield" else None
                ref = st.pop()
                if ref == 0:
                    thrown = fail(0)
                elif op == "getfield":
                    st.append(self.heap[ref].fields[(decl, fn)])
                else:
                    self.heap[ref].fields[(decl, fn)] = val
            elif op in ("invokestatic", "invokevirtual"):
                c, mn = ins.operands[0].split(".")
                target = model.lookup_method(c, mn)
                n = len(target.arg_types)
                args = st[len(st) - n:]
                del st[len(st) - n:]
                if op == "invokevirtual":
                    if args[0] == 0:
                        thrown = fail(0)
                    else:
                        target = model.lookup_method(self.heap[args[0]].cls, mn)
                if thrown is None:
                    active = sum(1 for fr in frames if fr.method is target)
                    if active >= k:
                        self.cutoff(recursion_property(model, target))
                    frames.append(self._frame(target, args))
                    continue       # caller's pc stays on the call until return
            elif op == "return":
                value = st.pop() if m.ret else None
                frames.pop()
                if not frames:
                    return value
                caller = frames[-1]
                if m.ret:
                    caller.stack.append(value)
                self.transfer(caller, caller.pc + 1)
                continue
            elif op == "newarray":
                n = st.pop()
                if n < 0:
                    thrown = fail(0)
                elif n > self.opts.max_array_length:
                    raise _Stop("pruned")
                else:
                    st.append(self.alloc(HeapArray([0] * n)))
            elif op in ("aload", "astore"):
                val = st.pop() if op == "astore" else None
                idx, ref = st.pop(), st.pop()
                if ref == 0:
                    thrown = fail(0)
                elif not 0 <= idx < len(self.heap[ref].data):
                    thrown = fail(1)
                elif op == "aload":
                    st.append(self.heap[ref].data[idx])
                else:
                    self.heap[ref].data[idx] = val
            elif op == "arraylength":
                ref = st.pop()
                if ref == 0:
                    thrown = fail(0)
                else:
                    st.append(len(self.heap[ref].data))
            elif op == "athrow":
                ref = st.pop()
                thrown = fail(0) if ref == 0 else ref
            elif op == "assert":
                if st.pop() == 0:
                    fail(0)
            elif op == "assume":
                if st.pop() == 0:
                    raise _Stop("pruned")
            elif op == "nondet_int":
                st.append(wrap(int(self.take("int"))))
            elif op == "nondet_string":
                s = self.take("string")
                if len(s) > self.opts.max_nondet_string_length:
                    raise _Stop("pruned")
                st.append(self.string(s))
            elif op == "s_len":
                st.append(len(st.pop()))
            elif op == "s_charat":
                i, s = st.pop(), st.pop()
                if not 0 <= i < len(s):
                    thrown = fail(0)
                else:
                    st.append(ord(s[i]))
            elif op == "s_indexof":
                frm, c, s = st.pop(), st.pop(), st.pop()
                st.append(java_index_of(s, c, frm))
            elif op == "s_substring":
                e, b, s = st.pop(), st.pop(), st.pop()
                if not 0 <= b <= e <= len(s):
                    thrown = fail(0)
                else:
                    st.append(s[b:e])
            elif op == "s_concat":
                b, a = st.pop(), st.pop()
                st.append(self.string(a + b))
            elif op == "s_equals":
                b, a = st.pop(), st.pop()
                st.append(int(a == b))
            elif op == "s_startswith":
                b, a = st.pop(), st.pop()
                st.append(int(a.startswith(b)))
            elif op == "s_insert":
                off, t, s = st.pop(), st.pop(), st.pop()
                if not 0 <= off <= len(s):
                    thrown = fail(0)
                else:
                    st.append(self.string(s[:off] + t + s[off:]))
            elif op == "s_of_int":
                st.append(self.string(str(st.pop())))
            else:  # pragma: no cover
                raise RuntimeError(f"unknown opcode {op}")

            if thrown is not None:
                self._throw(frames, thrown)
            else:
                self.transfer(f, nxt)

    def _frame(self, m: MethodDef, args: list) -> Frame:
        locs = list(args) + [0] * (m.max_locals - len(args))
        return Frame(m, locs)

    def _throw(self, frames: list[Frame], ref: int) -> None:
        cls = self.heap[ref].cls
        while frames:
            f = frames[-1]
            for lo, hi, handler, exc in f.method.handler_ranges():
                if lo <= f.pc < hi and self.model.is_subclass(cls, exc):
                    f.stack[:] = [ref]
                    self.transfer(f, handler)
                    return
            frames.pop()
        prop = uncaught_property(self.model, self.entry)
        raise _Stop("uncaught", pid=prop.pid, exc_class=cls, line=prop.line)


def run(model: ClassModel, entry: MethodDef, feed: Sequence, fuel: int = 100_000,
        opts: Options = Options()) -> ExecOutcome:
    return Interpreter(model, opts).run(entry, feed, fuel)


# ------------------------------------------------------------- enumeration

DEFAULT_DOMAINS = {
    "int": tuple(range(-2, 3)),
    "string": ("", "a", "b", "aa", "ab", "ba", "bb"),
    "int[]": (None, (), (0,), (1, -1)),
    "ref": (None, True),
}


@dataclass
class EnumResult:
    violations: dict = field(default_factory=dict)    # pid -> first feed found
    executions: int = 0
    fuel_exhausted: int = 0
    outcomes: list = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return "FAILURE" if self.violations else "SUCCESS"


def enumerate_feeds(model: ClassModel, entry: MethodDef, domains: dict | None = None,
                    opts: Options = Options(), fuel: int = 10_000,
                    keep_outcomes: bool = False) -> EnumResult:
    """Run every feed drawn from the finite domains (depth-first over demands)."""
    doms = dict(DEFAULT_DOMAINS)
    doms.update(domains or {})
    interp = Interpreter(model, opts)
    res = EnumResult()
    todo: list[tuple] = [()]
    while todo:
        prefix = todo.pop()
        try:
            out = interp.run(entry, prefix, fuel)
        except FeedExhausted as e:
            kind = e.kind if e.kind in doms else "ref"
            for v in reversed(doms[kind]):
                todo.append(prefix + (list(v) if isinstance(v, tuple) else v,))
            continue
        res.executions += 1
        if keep_outcomes:
            res.outcomes.append((prefix, out))
        if out.kind == "fuel_exhausted":
            res.fuel_exhausted += 1
        if out.violated and out.pid not in res.violations:
            res.violations[out.pid] = prefix
    return res

