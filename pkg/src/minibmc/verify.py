"""The verification pipeline: MJB model to per-property verdicts and traces."""

from __future__ import annotations

from dataclasses import dataclass, field

from .bvflat import Flattener
from .cex import Trace, build_trace
from .checks import KINDS, PropertyInfo
from .expr import BOOL
from .frontend import ClassModel, MethodDef, resolve_entry
from .gotoc import GotoOptions, GotoProgram, build_goto
from .options import Options
from .satcore import Solver
from .strsolve import StringSystem
from .symex import SsaSystem, unwind, violation


@dataclass
class PropertyResult:
    info: PropertyInfo
    failed: bool
    trace: Trace | None = None

    @property
    def status(self) -> str:
        return "FAILURE" if self.failed else "SUCCESS"


@dataclass
class Verification:
    entry: MethodDef
    prog: GotoProgram
    ssa: SsaSystem
    system: StringSystem
    results: list = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return any(r.failed for r in self.results)

    def result(self, pid: str) -> PropertyResult:
        for r in self.results:
            if r.info.pid == pid:
                return r
        raise KeyError(pid)


def property_order(info: PropertyInfo) -> tuple:
    """Sort key: method, then kind, then the number within the kind."""
    n = info.pid.rsplit(".", 1)[-1]
    return (info.method, KINDS.index(info.kind), int(n) if n.isdigit() else 0)


def collect_properties(prog: GotoProgram, ssa: SsaSystem) -> list[PropertyInfo]:
    infos = {p.pid: p for p in prog.properties}
    for pid, info in ssa.infos().items():
        infos.setdefault(pid, info)
    return sorted(infos.values(), key=property_order)


def prepare(model: ClassModel, entry: str | MethodDef, opts: Options = Options()):
    """Front half of the pipeline: GOTO program, SSA system, flattened constraints."""
    method = resolve_entry(model, entry) if isinstance(entry, str) else entry
    prog = build_goto(model, method, GotoOptions(opts.throw_runtime, opts.check_overflow))
    ssa = unwind(prog, opts)
    fl = Flattener(opts.max_array_length, ssa.max_string_length)
    for c in ssa.constraints:
        fl.assert_expr(c)
    system = StringSystem(fl, Solver())
    system.sync()
    # counterexamples favour null references, the shortest route to a failure
    for st in ssa.steps:
        if st.nondet is not None and st.nondet.sort == BOOL and id(st.nondet) in fl.cnf.bitmap:
            system.solver.prefer(fl.cnf.bitmap[id(st.nondet)])
    return method, prog, ssa, system


def verify(model: ClassModel, entry: str | MethodDef, opts: Options = Options(),
           traces: bool = True) -> Verification:
    method, prog, ssa, system = prepare(model, entry, opts)
    ver = Verification(method, prog, ssa, system)

    def class_name(cid: int) -> str:
        return prog.class_name(cid) if cid else "int[]"

    for info in collect_properties(prog, ssa):
        if not ssa.instances(info.pid):
            ver.results.append(PropertyResult(info, False))
            continue
        lit = system.fl.flatten(violation(ssa, info.pid))
        if not system.solve([lit]):
            ver.results.append(PropertyResult(info, False))
            continue
        trace = build_trace(ssa, system, class_name) if traces else None
        ver.results.append(PropertyResult(info, True, trace))
    return ver


def dimacs(model: ClassModel, entry: str | MethodDef, opts: Options = Options()) -> str:
    """CNF of the constraints conjoined with the violation of any property
    (string axioms are not included)."""
    _, prog, ssa, system = prepare(model, entry, opts)
    fl = system.fl
    bad = [fl.flatten(violation(ssa, pid)) for pid in ssa.property_ids()]
    fl.clause(*bad)
    return fl.cnf.dimacs()


def format_results(ver: Verification) -> str:
    lines = ["Results:"]
    for r in ver.results:
        i = r.info
        line = "?" if i.line is None else i.line
        bci = "?" if i.bytecode_index is None else i.bytecode_index
        lines.append(f"[{i.pid}]")
        lines.append(f"  {i.description} at file {i.file} line {line}")
        lines.append(f"  function {i.method} bytecode-index {bci}:")
        lines.append(f"  {r.status}")
    return "\n".join(lines)
