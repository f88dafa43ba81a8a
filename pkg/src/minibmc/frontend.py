"""MJB front-end: tokenizer, parser, resolver and stack/type verifier.

MJB is a line-oriented textual stand-in for JVM class files::

    class Counter {
      field count : int;
      method bump() : int locals 1 (this) {
        load 0
        load 0
        getfield Counter.count
        const 1
        add
        putfield Counter.count
        load 0
        getfield Counter.count
        return
      }
    }

The resulting :class:`ClassModel` is immutable; verification results (operand
stack types per instruction, local types) are attached to each method.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator

__all__ = [
    "MJBError", "MJBSyntaxError", "ResolutionError", "StackError",
    "ClassModel", "ClassDef", "MethodDef", "Instruction", "CatchEntry",
    "parse_module", "parse_modules", "resolve_entry", "print_model", "OPCODES",
    "BUILTIN_CLASSES",
]


class MJBError(Exception):
    pass


class MJBSyntaxError(MJBError):
    def __init__(self, msg: str, line: int, col: int, file: str | None = None):
        super().__init__(f"{file + ':' if file else ''}{line}:{col}: {msg}")
        self.msg = msg
        self.line = line
        self.col = col
        self.file = file


class ResolutionError(MJBError):
    pass


class StackError(MJBError):
    pass


# opcode -> operand kinds: i=int, s=string literal, L=label, C=class, F=field ref, M=method ref
OPCODES: dict[str, str] = {
    "const": "i", "sconst": "s", "null": "", "load": "i", "store": "i", "dup": "", "pop": "",
    "add": "", "sub": "", "mul": "", "div": "", "rem": "", "neg": "",
    "if_eq": "L", "if_ne": "L", "if_lt": "L", "if_le": "L", "if_gt": "L", "if_ge": "L", "goto": "L",
    "new": "C", "getfield": "F", "putfield": "F", "invokestatic": "M", "invokevirtual": "M",
    "return": "", "newarray": "", "aload": "", "astore": "", "arraylength": "", "athrow": "",
    "assert": "", "assume": "", "nondet_int": "", "nondet_string": "",
    "s_len": "", "s_charat": "", "s_indexof": "", "s_substring": "", "s_concat": "",
    "s_equals": "", "s_startswith": "", "s_insert": "", "s_of_int": "",
}

BRANCHES = {"if_eq", "if_ne", "if_lt", "if_le", "if_gt", "if_ge"}

PRIMITIVE_TYPES = ("int", "string", "int[]")

BUILTIN_SOURCE = """\
class Throwable exception { }
class Exception extends Throwable { }
class RuntimeException extends Exception { }
class NullPointerException extends RuntimeException { }
class ArithmeticException extends RuntimeException { }
class NegativeArraySizeException extends RuntimeException { }
class IndexOutOfBoundsException extends RuntimeException { }
class ArrayIndexOutOfBoundsException extends IndexOutOfBoundsException { }
class StringIndexOutOfBoundsException extends IndexOutOfBoundsException { }
"""

BUILTIN_CLASSES = (
    "Throwable", "Exception", "RuntimeException", "NullPointerException", "ArithmeticException",
    "NegativeArraySizeException", "IndexOutOfBoundsException",
    "ArrayIndexOutOfBoundsException", "StringIndexOutOfBoundsException",
)


@dataclass(frozen=True)
class Instruction:
    opcode: str
    operands: tuple = ()
    line: int | None = None

    def __str__(self) -> str:
        ops = []
        for kind, v in zip(OPCODES[self.opcode], self.operands):
            ops.append(_quote(v) if kind == "s" else str(v))
        text = " ".join([self.opcode, *ops])
        return f"{text} @ {self.line}" if self.line is not None else text


@dataclass(frozen=True)
class CatchEntry:
    start: str
    end: str
    handler: str
    exc_class: str


@dataclass(frozen=True)
class MethodDef:
    cls: str
    name: str
    params: tuple[str, ...]
    ret: str | None
    static: bool
    max_locals: int
    body: tuple[Instruction, ...]
    labels: tuple[tuple[str, int], ...]
    catches: tuple[CatchEntry, ...] = ()
    local_names: tuple[str, ...] = ()
    # filled in by the verifier
    frames: tuple = field(default=(), compare=False, repr=False)
    local_types: tuple = field(default=(), compare=False, repr=False)

    @property
    def qualname(self) -> str:
        return f"{self.cls}.{self.name}"

    @property
    def label_map(self) -> dict[str, int]:
        return dict(self.labels)

    @property
    def arg_types(self) -> tuple[str, ...]:
        return self.params if self.static else (self.cls, *self.params)

    def local_name(self, slot: int) -> str:
        if slot < len(self.local_names):
            return self.local_names[slot]
        return f"local{slot}"

    def handler_ranges(self) -> list[tuple[int, int, int, str]]:
        lm = self.label_map
        return [(lm[c.start], lm[c.end], lm[c.handler], c.exc_class) for c in self.catches]


@dataclass(frozen=True)
class ClassDef:
    name: str
    superclass: str | None
    fields: tuple[tuple[str, str], ...]
    methods: tuple[MethodDef, ...]
    is_exception_class: bool = False
    file: str = "<input>"
    line: int = field(default=0, compare=False)      # source position, not structure
    declared_exception: bool = field(default=False, compare=True)

    def method(self, name: str) -> MethodDef | None:
        for m in self.methods:
            if m.name == name:
                return m
        return None


@dataclass(frozen=True)
class ClassModel:
    classes: tuple[ClassDef, ...]

    def __post_init__(self):
        object.__setattr__(self, "_by_name", {c.name: c for c in self.classes})

    def cls(self, name: str) -> ClassDef:
        try:
            return self._by_name[name]
        except KeyError:
            raise ResolutionError(f"unknown class {name!r}") from None

    def has_class(self, name: str) -> bool:
        return name in self._by_name

    @property
    def user_classes(self) -> tuple[ClassDef, ...]:
        return tuple(c for c in self.classes if c.name not in BUILTIN_CLASSES)

    @property
    def entries(self) -> dict[str, MethodDef]:
        return {m.qualname: m for c in self.classes for m in c.methods}

    def superclasses(self, name: str) -> list[str]:
        """name followed by its ancestors."""
        out = []
        cur: str | None = name
        while cur is not None:
            out.append(cur)
            cur = self.cls(cur).superclass
        return out

    def is_subclass(self, sub: str, sup: str) -> bool:
        if sub == sup:
            return True
        if sub in PRIMITIVE_TYPES or sup in PRIMITIVE_TYPES or not self.has_class(sub):
            return False
        return sup in self.superclasses(sub)

    def subclasses(self, name: str) -> list[str]:
        """All classes D with D <= name, in declaration order."""
        return [c.name for c in self.classes if self.is_subclass(c.name, name)]

    def all_fields(self, name: str) -> list[tuple[str, str, str]]:
        """(declaring class, field, type) including inherited fields, superclass first."""
        out = []
        for c in reversed(self.superclasses(name)):
            out.extend((c, f, t) for f, t in self.cls(c).fields)
        return out

    def lookup_field(self, cls: str, fname: str) -> tuple[str, str]:
        for c in self.superclasses(cls):
            for f, t in self.cls(c).fields:
                if f == fname:
                    return c, t
        raise ResolutionError(f"unknown field {cls}.{fname}")

    def lookup_method(self, cls: str, mname: str) -> MethodDef:
        for c in self.superclasses(cls):
            m = self.cls(c).method(mname)
            if m is not None:
                return m
        raise ResolutionError(f"unknown method {cls}.{mname}")

    def find_method(self, cls: str, mname: str) -> MethodDef | None:
        try:
            return self.lookup_method(cls, mname)
        except ResolutionError:
            return None

    def is_exception(self, name: str) -> bool:
        return self.has_class(name) and self.cls(name).is_exception_class


# ---------------------------------------------------------------- tokenizer

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*|\#[^\n]*)
  | (?P<str>"(?:[^"\\\n]|\\.)*")
  | (?P<int>-?\d+)
  | (?P<arrow>->)
  | (?P<name>[A-Za-z_$][A-Za-z0-9_$]*(?:\.[A-Za-z_$][A-Za-z0-9_$]*)?)
  | (?P<punct>[{}():;,@\[\]])
""", re.VERBOSE)


@dataclass
class Tok:
    kind: str
    text: str
    line: int
    col: int


def _unquote(text: str, line: int, col: int) -> str:
    body = text[1:-1]
    out = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch != "\\":
            out.append(ch)
            i += 1
            continue
        nxt = body[i + 1]
        if nxt == "u":
            hexpart = body[i + 2:i + 6]
            if not re.fullmatch(r"[0-9a-fA-F]{4}", hexpart):
                raise MJBSyntaxError("bad \\u escape", line, col + i)
            out.append(chr(int(hexpart, 16)))
            i += 6
            continue
        simple = {"n": "\n", "t": "\t", "\\": "\\", '"': '"', "'": "'", "r": "\r"}
        if nxt not in simple:
            raise MJBSyntaxError(f"unknown escape \\{nxt}", line, col + i)
        out.append(simple[nxt])
        i += 2
    return "".join(out)


def _quote(s: str) -> str:
    out = []
    for ch in s:
        if ch in '"\\':
            out.append("\\" + ch)
        elif 0x20 <= ord(ch) < 0x7F:
            out.append(ch)
        else:
            out.append(f"\\u{ord(ch):04x}")
    return '"' + "".join(out) + '"'


def tokenize(text: str) -> list[Tok]:
    toks = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise MJBSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            toks.append(Tok(kind, m.group(), line, col))
        pos = m.end()
    toks.append(Tok("eof", "", line, pos - line_start + 1))
    return toks


# ------------------------------------------------------------------ parser

class _Parser:
    def __init__(self, text: str, filename: str):
        self.toks = tokenize(text)
        self.pos = 0
        self.filename = filename

    @property
    def tok(self) -> Tok:
        return self.toks[self.pos]

    def error(self, msg: str, tok: Tok | None = None):
        tok = tok or self.tok
        return MJBSyntaxError(msg, tok.line, tok.col)

    def next(self) -> Tok:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def accept(self, text: str) -> bool:
        if self.tok.text == text and self.tok.kind in ("name", "punct", "arrow"):
            self.pos += 1
            return True
        return False

    def expect(self, text: str) -> Tok:
        if not self.accept(text):
            raise self.error(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        return self.toks[self.pos - 1]

    def name(self, dotted: bool = False) -> str:
        t = self.tok
        if t.kind != "name" or (not dotted and "." in t.text):
            raise self.error(f"expected a name, found {t.text or 'end of input'!r}")
        self.pos += 1
        return t.text

    def integer(self) -> int:
        t = self.tok
        if t.kind != "int":
            raise self.error(f"expected an integer, found {t.text or 'end of input'!r}")
        self.pos += 1
        return int(t.text)

    def type_(self) -> str:
        n = self.name()
        if n == "int" and self.accept("["):
            self.expect("]")
            return "int[]"
        return n

    def module(self) -> list[ClassDef]:
        classes = []
        while self.tok.kind != "eof":
            classes.append(self.classdef())
        return classes

    def classdef(self) -> ClassDef:
        start = self.expect("class")
        name = self.name()
        sup = None
        if self.accept("extends"):
            sup = self.name()
        exc = self.accept("exception")
        self.expect("{")
        fields: list[tuple[str, str]] = []
        methods: list[MethodDef] = []
        while not self.accept("}"):
            if self.tok.text == "field":
                self.next()
                fname = self.name()
                self.expect(":")
                ftype = self.type_()
                self.expect(";")
                fields.append((fname, ftype))
            elif self.tok.text in ("static", "method"):
                methods.append(self.methoddef(name))
            else:
                raise self.error(f"expected 'field', 'method' or '}}', found {self.tok.text!r}")
        return ClassDef(name, sup, tuple(fields), tuple(methods), exc, self.filename, start.line, exc)

    def methoddef(self, cls: str) -> MethodDef:
        static = self.accept("static")
        self.expect("method")
        name = self.name()
        self.expect("(")
        params: list[str] = []
        if not self.accept(")"):
            params.append(self.type_())
            while self.accept(","):
                params.append(self.type_())
            self.expect(")")
        ret = None
        if self.accept(":"):
            ret = self.type_()
            if ret == "void":
                ret = None
        self.expect("locals")
        max_locals = self.integer()
        names: list[str] = []
        if self.accept("("):
            if not self.accept(")"):
                names.append(self.name())
                while self.accept(","):
                    names.append(self.name())
                self.expect(")")
        self.expect("{")
        body: list[Instruction] = []
        labels: list[tuple[str, int]] = []
        while not self.accept("}"):
            t = self.tok
            if t.kind == "name" and self.toks[self.pos + 1].text == ":" and t.text not in OPCODES:
                self.pos += 2
                if any(lbl == t.text for lbl, _ in labels):
                    raise self.error(f"duplicate label {t.text!r}", t)
                labels.append((t.text, len(body)))
                continue
            body.append(self.instr())
        catches = []
        while self.tok.text == "catch":
            self.next()
            self.expect("(")
            s = self.name()
            self.expect(",")
            e = self.name()
            self.expect(")")
            self.expect("->")
            h = self.name()
            self.expect(":")
            c = self.name()
            catches.append(CatchEntry(s, e, h, c))
        return MethodDef(cls, name, tuple(params), ret, static, max_locals, tuple(body),
                         tuple(labels), tuple(catches), tuple(names))

    def instr(self) -> Instruction:
        t = self.tok
        if t.kind != "name" or t.text not in OPCODES:
            raise self.error(f"unknown opcode {t.text!r}")
        self.pos += 1
        ops = []
        for kind in OPCODES[t.text]:
            if kind == "i":
                ops.append(self.integer())
            elif kind == "s":
                st = self.tok
                if st.kind != "str":
                    raise self.error("expected a string literal")
                self.pos += 1
                ops.append(_unquote(st.text, st.line, st.col))
            elif kind in ("F", "M"):
                ref = self.name(dotted=True)
                if "." not in ref:
                    raise self.error(f"expected Class.member, found {ref!r}")
                ops.append(ref)
            else:
                ops.append(self.name())
        line = t.line
        if self.accept("@"):
            line = self.integer()
        return Instruction(t.text, tuple(ops), line)


# ------------------------------------------------------------- verification

def _lub(model: ClassModel, a: str, b: str) -> str:
    if a == b:
        return a
    if a == "null" and b not in ("int", "string", "top"):
        return b
    if b == "null" and a not in ("int", "string", "top"):
        return a
    if a in ("int", "string", "int[]", "top") or b in ("int", "string", "int[]", "top"):
        return "top"
    sa = model.superclasses(a)
    for c in model.superclasses(b):
        if c in sa:
            return c
    return "top"


def _is_ref(t: str) -> bool:
    return t not in ("int", "string", "top")


def _assignable(model: ClassModel, t: str, target: str) -> bool:
    if t == target:
        return True
    if t == "null":
        return _is_ref(target)
    if target in PRIMITIVE_TYPES or t in PRIMITIVE_TYPES:
        return False
    return model.is_subclass(t, target)


def _verify_method(model: ClassModel, m: MethodDef) -> None:
    where = m.qualname
    lm = m.label_map
    n = len(m.body)
    for lbl, idx in m.labels:
        if idx > n:
            raise ResolutionError(f"{where}: label {lbl} out of range")
    for c in m.catches:
        for lbl in (c.start, c.end, c.handler):
            if lbl not in lm:
                raise ResolutionError(f"{where}: unknown label {lbl!r} in catch")
        if not model.has_class(c.exc_class):
            raise ResolutionError(f"{where}: unknown class {c.exc_class!r} in catch")
        if not model.is_exception(c.exc_class):
            raise ResolutionError(f"{where}: {c.exc_class} is not an exception class")
        if not lm[c.start] < lm[c.end]:
            raise ResolutionError(f"{where}: catch range {c.start}..{c.end} is empty or reversed")
        if lm[c.handler] < lm[c.end]:
            raise ResolutionError(f"{where}: handler {c.handler} must follow its protected range")
        if lm[c.handler] >= n:
            raise ResolutionError(f"{where}: handler {c.handler} has no code")
    args = m.arg_types
    if len(args) > m.max_locals:
        raise ResolutionError(f"{where}: locals {m.max_locals} smaller than parameter count {len(args)}")
    for t in args + ((m.ret,) if m.ret else ()):
        if t not in PRIMITIVE_TYPES and not model.has_class(t):
            raise ResolutionError(f"{where}: unknown type {t!r}")

    # resolve operands once
    for k, ins in enumerate(m.body):
        op = ins.opcode
        kinds = OPCODES[op]
        for kind, v in zip(kinds, ins.operands):
            if kind == "L" and v not in lm:
                raise ResolutionError(f"{where}[{k}]: unknown label {v!r}")
            if kind == "C" and not model.has_class(v):
                raise ResolutionError(f"{where}[{k}]: unknown class {v!r}")
            if kind == "F":
                c, f = v.split(".")
                model.lookup_field(c, f)
            if kind == "M":
                c, mn = v.split(".")
                if not model.has_class(c):
                    raise ResolutionError(f"{where}[{k}]: unknown class {c!r}")
                target = model.lookup_method(c, mn)
                if (op == "invokestatic") != target.static:
                    raise ResolutionError(f"{where}[{k}]: {op} on {'static' if target.static else 'instance'} method {v}")
        if op in ("load", "store") and not 0 <= ins.operands[0] < m.max_locals:
            raise ResolutionError(f"{where}[{k}]: local slot {ins.operands[0]} outside 0..{m.max_locals - 1}")

    # abstract interpretation over (stack types, local types)
    init_locals = tuple(list(args) + ["top"] * (m.max_locals - len(args)))
    frames: list[tuple | None] = [None] * (n + 1)
    work = [0]
    frames[0] = ((), init_locals)
    handlers = m.handler_ranges()

    def err(k: int, msg: str):
        return StackError(f"{where}[{k}] {m.body[k].opcode if k < n else 'end'}: {msg}")

    def flow(k: int, target: int, stack: tuple, locs: tuple, src: int):
        if target > n:
            raise err(src, "control flows past end of method")
        old = frames[target]
        if old is None:
            frames[target] = (stack, locs)
            work.append(target)
            return
        ostack, olocs = old
        if len(ostack) != len(stack):
            raise err(src, f"inconsistent stack depth at {target}: {len(ostack)} vs {len(stack)}")
        nstack = tuple(_lub(model, a, b) for a, b in zip(ostack, stack))
        if "top" in nstack:
            raise err(src, f"incompatible stack types at {target}")
        nlocs = tuple(_lub(model, a, b) for a, b in zip(olocs, locs))
        if (nstack, nlocs) != old:
            frames[target] = (nstack, nlocs)
            work.append(target)

    while work:
        k = work.pop()
        stack, locs = frames[k]
        if k == n:
            raise err(k, "control flows past end of method")
        ins = m.body[k]
        op = ins.opcode
        st = list(stack)
        lc = list(locs)

        def pop(expect: str | None = None) -> str:
            if not st:
                raise err(k, "operand stack underflow")
            t = st.pop()
            if expect == "ref":
                if not _is_ref(t) or t == "int[]":
                    raise err(k, f"expected object reference, found {t}")
            elif expect is not None and not _assignable(model, t, expect):
                raise err(k, f"expected {expect}, found {t}")
            return t

        for lo, hi, h, c in handlers:
            if lo <= k < hi:
                flow(k, h, (c,), locs, k)

        nxt = True
        if op == "const":
            st.append("int")
        elif op == "sconst":
            st.append("string")
        elif op == "null":
            st.append("null")
        elif op == "load":
            t = lc[ins.operands[0]]
            if t == "top":
                raise err(k, f"load of unset or conflicting local {ins.operands[0]}")
            st.append(t)
        elif op == "store":
            lc[ins.operands[0]] = pop()
        elif op == "dup":
            t = pop()
            st.extend((t, t))
        elif op == "pop":
            pop()
        elif op in ("add", "sub", "mul", "div", "rem"):
            pop("int")
            pop("int")
            st.append("int")
        elif op == "neg":
            pop("int")
            st.append("int")
        elif op in BRANCHES:
            b = pop()
            a = pop()
            if a == "int" or b == "int":
                if not (a == b == "int"):
                    raise err(k, f"comparison of {a} with {b}")
            elif a == "string" or b == "string":
                raise err(k, "string comparison by branch; use s_equals")
            elif op not in ("if_eq", "if_ne"):
                raise err(k, "ordering comparison of references")
            flow(k, lm[ins.operands[0]], tuple(st), tuple(lc), k)
        elif op == "goto":
            flow(k, lm[ins.operands[0]], tuple(st), tuple(lc), k)
            nxt = False
        elif op == "new":
            c = ins.operands[0]
            st.append(c)
        elif op == "getfield":
            c, f = ins.operands[0].split(".")
            _, ftype = model.lookup_field(c, f)
            pop(c)
            st.append(ftype)
        elif op == "putfield":
            c, f = ins.operands[0].split(".")
            _, ftype = model.lookup_field(c, f)
            pop(ftype)
            pop(c)
        elif op in ("invokestatic", "invokevirtual"):
            c, mn = ins.operands[0].split(".")
            target = model.lookup_method(c, mn)
            for p in reversed(target.params):
                pop(p)
            if op == "invokevirtual":
                pop(c)
            if target.ret:
                st.append(target.ret)
        elif op == "return":
            if m.ret:
                pop(m.ret)
            nxt = False
        elif op == "newarray":
            pop("int")
            st.append("int[]")
        elif op == "aload":
            pop("int")
            pop("int[]")
            st.append("int")
        elif op == "astore":
            pop("int")
            pop("int")
            pop("int[]")
        elif op == "arraylength":
            pop("int[]")
            st.append("int")
        elif op == "athrow":
            t = pop("ref")
            if t != "null" and not model.is_exception(t):
                raise err(k, f"athrow of non-exception type {t}")
            nxt = False
        elif op in ("assert", "assume"):
            pop("int")
        elif op == "nondet_int":
            st.append("int")
        elif op == "nondet_string":
            st.append("string")
        elif op == "s_len":
            pop("string")
            st.append("int")
        elif op == "s_charat":
            pop("int")
            pop("string")
            st.append("int")
        elif op == "s_indexof":
            pop("int")
            pop("int")
            pop("string")
            st.append("int")
        elif op == "s_substring":
            pop("int")
            pop("int")
            pop("string")
            st.append("string")
        elif op in ("s_concat",):
            pop("string")
            pop("string")
            st.append("string")
        elif op in ("s_equals", "s_startswith"):
            pop("string")
            pop("string")
            st.append("int")
        elif op == "s_insert":
            pop("int")
            pop("string")
            pop("string")
            st.append("string")
        elif op == "s_of_int":
            pop("int")
            st.append("string")
        else:  # pragma: no cover - OPCODES is closed
            raise err(k, "unknown opcode")
        if nxt:
            flow(k, k + 1, tuple(st), tuple(lc), k)

    # loop regions [head, back-edge] must nest; the unwinding bound relies on it
    regions = [(lm[ins.operands[0]], j) for j, ins in enumerate(m.body)
               if (ins.opcode == "goto" or ins.opcode in BRANCHES) and lm[ins.operands[0]] <= j]
    for h1, b1 in regions:
        for h2, b2 in regions:
            if h1 < h2 <= b1 < b2:
                raise StackError(f"{where}: loops {h1}..{b1} and {h2}..{b2} overlap without nesting")

    # every local slot must keep a single value kind across the method
    kinds: dict[int, set[str]] = {}
    for fr in frames:
        if fr is None:
            continue
        for slot, t in enumerate(fr[1]):
            if t not in ("top", "null"):
                kinds.setdefault(slot, set()).add(_kind(t))
    local_types = tuple(
        next(iter(kinds[s])) if len(kinds.get(s, ())) == 1 else ("mixed" if s in kinds else "unused")
        for s in range(m.max_locals))
    object.__setattr__(m, "frames", tuple(frames))
    object.__setattr__(m, "local_types", local_types)


def _kind(t: str) -> str:
    if t in ("int", "string"):
        return t
    return "ref"


def _validate(model: ClassModel) -> None:
    names = set()
    for c in model.classes:
        if c.name in names:
            raise ResolutionError(f"duplicate class {c.name!r}")
        if c.name in PRIMITIVE_TYPES or c.name in ("void", "null", "top"):
            raise ResolutionError(f"reserved class name {c.name!r}")
        names.add(c.name)
    for c in model.classes:
        if c.superclass is not None and c.superclass not in names:
            raise ResolutionError(f"class {c.name} extends unknown class {c.superclass!r}")
    for c in model.classes:
        seen = {c.name}
        cur = c.superclass
        while cur is not None:
            if cur in seen:
                raise ResolutionError(f"inheritance cycle through {c.name}")
            seen.add(cur)
            cur = model.cls(cur).superclass
    for c in model.classes:
        fnames = [f for f, _ in c.fields]
        if len(set(fnames)) != len(fnames):
            raise ResolutionError(f"duplicate field in class {c.name}")
        for _, t in c.fields:
            if t not in PRIMITIVE_TYPES and t not in names:
                raise ResolutionError(f"unknown field type {t!r} in class {c.name}")
        mnames = [m.name for m in c.methods]
        if len(set(mnames)) != len(mnames):
            raise ResolutionError(f"method overloading is not supported (class {c.name})")
        if c.superclass is not None:
            for m in c.methods:
                over = model.find_method(c.superclass, m.name)
                if over is not None and (over.params, over.ret, over.static) != (m.params, m.ret, m.static):
                    raise ResolutionError(f"{m.qualname} does not match the signature of {over.qualname}")


def _with_exception_flags(classes: list[ClassDef]) -> list[ClassDef]:
    by = {c.name: c for c in classes}

    def is_exc(name: str, depth: int = 0) -> bool:
        c = by.get(name)
        if c is None or depth > len(by):
            return False
        return c.declared_exception or (c.superclass is not None and is_exc(c.superclass, depth + 1))

    out = []
    for c in classes:
        flag = is_exc(c.name)
        out.append(c if flag == c.is_exception_class else
                   ClassDef(c.name, c.superclass, c.fields, c.methods, flag, c.file, c.line, c.declared_exception))
    return out


def parse_modules(sources: list[tuple[str, str]]) -> ClassModel:
    """Parse several (text, filename) sources into one ClassModel."""
    classes = _Parser(BUILTIN_SOURCE, "<builtin>").module()
    for text, filename in sources:
        try:
            classes.extend(_Parser(text, filename).module())
        except MJBSyntaxError as e:
            if e.file is not None:
                raise
            raise MJBSyntaxError(e.msg, e.line, e.col, filename) from None
    classes = _with_exception_flags(classes)
    model = ClassModel(tuple(classes))
    _validate(model)
    for c in model.classes:
        for m in c.methods:
            _verify_method(model, m)
    return model


def parse_module(text: str, filename: str = "<input>") -> ClassModel:
    return parse_modules([(text, filename)])


def resolve_entry(model: ClassModel, name: str) -> MethodDef:
    """Resolve ``Class.method`` (or ``Class``, meaning its ``main``)."""
    if "." in name:
        cls, mname = name.rsplit(".", 1)
    else:
        cls, mname = name, "main"
    if not model.has_class(cls):
        raise ResolutionError(f"entry point {name!r} not found: no class {cls!r}")
    matches = [m for m in model.cls(cls).methods if m.name == mname]
    if not matches:
        raise ResolutionError(f"entry point {name!r} not found")
    if len(matches) > 1:
        raise ResolutionError(f"entry point {name!r} is ambiguous")
    return matches[0]


def print_model(model: ClassModel) -> str:
    """Render the user classes back to MJB text."""
    out = []
    for c in model.user_classes:
        head = f"class {c.name}"
        if c.superclass:
            head += f" extends {c.superclass}"
        if c.declared_exception:
            head += " exception"
        out.append(head + " {")
        for f, t in c.fields:
            out.append(f"  field {f} : {t};")
        for m in c.methods:
            sig = ("static " if m.static else "") + f"method {m.name}({', '.join(m.params)})"
            if m.ret:
                sig += f" : {m.ret}"
            sig += f" locals {m.max_locals}"
            if m.local_names:
                sig += " (" + ", ".join(m.local_names) + ")"
            out.append("  " + sig + " {")
            by_index: dict[int, list[str]] = {}
            for lbl, idx in m.labels:
                by_index.setdefault(idx, []).append(lbl)
            for k in range(len(m.body) + 1):
                for lbl in by_index.get(k, ()):
                    out.append(f"   {lbl}:")
                if k < len(m.body):
                    out.append(f"    {m.body[k]}")
            out.append("  }" + "".join(
                f" catch ({e.start}, {e.end}) -> {e.handler} : {e.exc_class}" for e in m.catches))
        out.append("}")
        out.append("")
    return "\n".join(out)
