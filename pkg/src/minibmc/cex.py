"""Counterexample traces from satisfying assignments, and their replay."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from . import expr as E
from .expr import ARRAY, BOOL, CHAR, INT, REF, STRING
from .frontend import ClassModel, MethodDef
from .interp import ExecOutcome, run
from .options import Options
from .strsolve import StringSystem, quote
from .symex import SsaSystem


class TraceError(Exception):
    pass


@dataclass
class TraceStep:
    file: str
    line: int | None
    function: str
    name: str
    text: str                   # rendered value
    is_input: bool = False
    value: Any = None           # feed value for inputs


@dataclass
class Trace:
    steps: list = field(default_factory=list)
    feed: list = field(default_factory=list)     # values replayed into the interpreter

    def inputs(self) -> list[TraceStep]:
        return [s for s in self.steps if s.is_input]

    def assignments(self) -> list[TraceStep]:
        return [s for s in self.steps if not s.is_input]

    def value_of(self, name: str) -> list[str]:
        """Rendered values assigned to ``name``, in order."""
        return [s.text for s in self.steps if s.name == name]

    def render(self) -> str:
        inputs = [f"INPUT {s.name}: {s.text}" for s in self.inputs()]
        blocks = ["\n".join(inputs)] if inputs else []
        for s in self.assignments():
            line = "?" if s.line is None else s.line
            blocks.append(f"{s.file} line {line} function {s.function}\n  {s.name}={s.text}")
        return "\n\n".join(blocks)


def render_char(v: int) -> str:
    if 32 <= v < 127 and chr(v) not in "'\\":
        return f"'{chr(v)}'"
    if chr(v) in "'\\":
        return f"'\\{chr(v)}'"
    return f"'\\u{v:04x}'"


def render_value(v: Any, sort: E.Sort, class_name=None, array_len: int | None = None) -> str:
    if sort == BOOL:
        return "true" if v else "false"
    if sort == STRING:
        return quote(v)
    if sort == CHAR:
        return render_char(v)
    if sort == REF:
        return "null" if v == 0 else f"dynamic_object{v}"
    if sort == ARRAY:
        cells = [E.to_signed(c) for c in v]
        if array_len is not None:
            cells = cells[:max(0, array_len)]
        return "{ " + ", ".join(str(c) for c in cells) + " }" if cells else "{ }"
    return str(E.to_signed(v, sort.width))


def build_trace(ssa: SsaSystem, system: StringSystem, class_name=None) -> Trace:
    """Executed assignments of the model found by ``system``, in program order."""
    model, comp = system.assignment, system.completed
    if model is None:
        raise TraceError("no model to build a trace from")
    memo: dict = {}

    def ev(e):
        return system.evaluate(e, model, comp, memo=memo)

    trace = Trace()
    lengths: dict[str, int] = {}
    objects = {o.name: o for o in ssa.objects}
    first_value: dict[str, Any] = {}
    for st in ssa.steps:
        if st.kind == "constraint" or not ev(st.guard):
            continue
        value = ev(st.value)
        if st.name and st.name not in first_value:
            first_value[st.name] = (value, st.value.sort)
        if st.kind == "alloc":
            name = class_name(value) if class_name else str(value)
            text = f'"{name}"'
        else:
            if st.hidden and st.nondet is None:
                continue
            sort = st.value.sort
            arr_len = None
            if sort == ARRAY and st.name.endswith(".data"):
                arr_len = lengths.get(st.name[:-len(".data")])
            text = render_value(value, sort, array_len=arr_len)
            if st.name.endswith(".length") and sort == INT:
                lengths[st.name[:-len(".length")]] = E.to_signed(value)
        loc = st.loc
        file = loc.file if loc else "?"
        line = loc.line if loc else None
        function = loc.function if loc else "?"
        is_input = st.kind == "input" or st.nondet is not None
        name = st.name if not st.hidden else "nondet"
        if is_input and st.value.sort == REF:
            text = "null" if value == 0 else f"&dynamic_object{value}"
        step = TraceStep(file, line, function, name, text, is_input)
        if is_input:
            step.value = _feed_value(ssa, st, value, ev, objects)
            if st.name != "this":
                trace.feed.append(step.value)
        trace.steps.append(step)
    return trace


def _feed_value(ssa: SsaSystem, st, value, ev, objects) -> Any:
    sort = st.value.sort
    if sort == STRING:
        return value
    if sort == INT:
        return E.to_signed(value)
    if sort == REF:
        if value == 0:
            return None
        obj = ssa.objects[value - 1]
        if obj.cls != "int[]":
            return True
        length = data = None
        for s in ssa.steps:
            if s.name == f"{obj.name}.length" and length is None:
                length = E.to_signed(ev(s.value))
            if s.name == f"{obj.name}.data" and data is None:
                data = ev(s.value)
        return [E.to_signed(c) for c in (data or ())[:max(0, length or 0)]]
    raise TraceError(f"unsupported input sort {sort}")


def replay(trace: Trace, model: ClassModel, entry: MethodDef, opts: Options = Options(),
           fuel: int = 1_000_000) -> ExecOutcome:
    """Run the interpreter on the inputs recorded in ``trace``."""
    return run(model, entry, trace.feed, fuel, opts)
