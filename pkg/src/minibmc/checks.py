"""Which proof obligations each MJB instruction carries, and their ids.

Both the GOTO instrumentation and the concrete interpreter number properties
through :func:`property_table`, so a violation observed by either side names
the same ``Class.method.kind.N`` id.
"""

from __future__ import annotations

from dataclasses import dataclass

from .frontend import ClassModel, MethodDef

KINDS = ("assertion", "null-deref", "array-bounds", "div-by-zero", "overflow",
         "no-uncaught-exception", "unwind")

RUNTIME_KINDS = ("null-deref", "array-bounds", "div-by-zero")


@dataclass(frozen=True)
class CheckSpec:
    kind: str
    description: str
    exc_class: str | None = None   # exception thrown instead when runtime exceptions are explicit


_NULL = CheckSpec("null-deref", "null pointer check", "NullPointerException")
_ABOUNDS = CheckSpec("array-bounds", "array index within bounds", "ArrayIndexOutOfBoundsException")
_SBOUNDS = CheckSpec("array-bounds", "string index within bounds", "StringIndexOutOfBoundsException")
_ASIZE = CheckSpec("array-bounds", "array size non-negative", "NegativeArraySizeException")
_DIV = CheckSpec("div-by-zero", "division by zero check", "ArithmeticException")


def instruction_checks(opcode: str, check_overflow: bool = False) -> list[CheckSpec]:
    """Checks guarding one instruction, in firing order (null before bounds)."""
    if opcode in ("getfield", "putfield", "invokevirtual", "arraylength", "athrow"):
        return [_NULL]
    if opcode in ("aload", "astore"):
        return [_NULL, _ABOUNDS]
    if opcode in ("div", "rem"):
        return [_DIV]
    if opcode == "newarray":
        return [_ASIZE]
    if opcode in ("s_charat", "s_substring", "s_insert"):
        return [_SBOUNDS]
    if opcode in ("add", "sub", "mul", "neg") and check_overflow:
        return [CheckSpec("overflow", f"arithmetic overflow on {opcode}")]
    if opcode == "assert":
        return [CheckSpec("assertion", "assertion")]
    return []


def is_property(spec: CheckSpec, throw_runtime: bool) -> bool:
    return not (throw_runtime and spec.exc_class is not None)


@dataclass(frozen=True)
class PropertyInfo:
    pid: str
    kind: str
    description: str
    method: str
    bytecode_index: int | None
    line: int | None
    file: str


def property_table(model: ClassModel, method: MethodDef, throw_runtime: bool = False,
                   check_overflow: bool = False) -> dict[tuple[int, int], PropertyInfo]:
    """Map (bytecode index, position in the instruction's check list) to its property."""
    counters: dict[str, int] = {}
    table = {}
    file = model.cls(method.cls).file
    for k, ins in enumerate(method.body):
        if method.frames and method.frames[k] is None:
            continue        # unreachable code carries no obligations
        for pos, spec in enumerate(instruction_checks(ins.opcode, check_overflow)):
            if not is_property(spec, throw_runtime):
                continue
            counters[spec.kind] = counters.get(spec.kind, 0) + 1
            pid = f"{method.qualname}.{spec.kind}.{counters[spec.kind]}"
            table[(k, pos)] = PropertyInfo(pid, spec.kind, spec.description, method.qualname, k, ins.line, file)
    return table


def uncaught_property(model: ClassModel, entry: MethodDef) -> PropertyInfo:
    line = entry.body[0].line if entry.body else None
    return PropertyInfo(f"{entry.qualname}.no-uncaught-exception.1", "no-uncaught-exception",
                        "no uncaught exception", entry.qualname, 0, line, model.cls(entry.cls).file)


def loop_regions(method: MethodDef) -> dict[int, int]:
    """Back-edge index -> loop head index."""
    lm = method.label_map
    return {k: lm[method.body[k].operands[0]] for k in back_edges(method)}


def back_edges(method: MethodDef) -> list[int]:
    """Bytecode indices of backward branches (loop back-edges), in program order."""
    lm = method.label_map
    out = []
    for k, ins in enumerate(method.body):
        if ins.opcode == "goto" or ins.opcode.startswith("if_"):
            if lm[ins.operands[0]] <= k:
                out.append(k)
    return out


def unwind_property(model: ClassModel, method: MethodDef, k: int) -> PropertyInfo:
    n = back_edges(method).index(k) + 1
    return PropertyInfo(f"{method.qualname}.unwind.{n}", "unwind", f"unwinding assertion loop {n}",
                        method.qualname, k, method.body[k].line, model.cls(method.cls).file)


def recursion_property(model: ClassModel, method: MethodDef) -> PropertyInfo:
    """Unwinding assertion for recursive calls of ``method`` (numbered after its loops)."""
    n = len(back_edges(method)) + 1
    line = method.body[0].line if method.body else None
    return PropertyInfo(f"{method.qualname}.unwind.{n}", "unwind", "recursion unwinding assertion",
                        method.qualname, 0, line, model.cls(method.cls).file)
