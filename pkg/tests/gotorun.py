"""A direct concrete executor for lowered GOTO programs.

Used only as a test oracle: running the lowered program must give the same
outcome as the interpreter running the original bytecode.  Nondet values come
from a feed in the interpreter's order; loops are not bounded, only fuel is.
"""

from __future__ import annotations

from typing import Any

from minibmc import expr as E
from minibmc.gotoc import (Assert, Assign, Call, Goto, GotoProgram, Return, Skip, THROWN,
                           Assume, START)

MASK = 0xFFFFFFFF


class Stop(Exception):
    def __init__(self, kind: str, pid: str | None = None):
        self.kind, self.pid = kind, pid


class GotoRunner:
    def __init__(self, prog: GotoProgram, feed: list, fuel: int = 200_000):
        self.prog = prog
        self.feed = list(feed)
        self.fuel = fuel
        self.heap: list[Any] = [None]          # id 0 is null
        self.globals = {THROWN.val: 0}

    # ----------------------------------------------------------- values
    def take(self) -> Any:
        if not self.feed:
            raise Stop("feed_exhausted")
        return self.feed.pop(0)

    def nondet(self, type_: str, may_null: bool) -> Any:
        if type_ == "int":
            return self.take() & MASK
        if type_ == "string":
            return self.take()
        if not may_null:
            return self.alloc(type_)
        v = self.take()
        if v is None or v is False or v == 0:
            return 0
        if type_ == "int[]":
            return self.alloc_array([x & MASK for x in v])
        return self.alloc(type_)

    def alloc(self, cls: str) -> int:
        self.heap.append({"@class": cls})
        return len(self.heap) - 1

    def alloc_array(self, data: list) -> int:
        self.heap.append({"@class": "int[]", "data": data})
        return len(self.heap) - 1

    def default(self, sort: E.Sort) -> Any:
        return "" if sort == E.STRING else 0

    # ------------------------------------------------------- expressions
    def ev(self, e: E.Expr, env: dict) -> Any:
        op = e.op
        if op == "sym":
            if e.val in env:
                return env[e.val]
            return self.globals.get(e.val, self.default(e.sort))
        if op == "field":
            obj = self.heap[self.ev(e.args[0], env)]
            return obj.get(e.val, self.default(e.sort))
        if op == "alen":
            return len(self.heap[self.ev(e.args[0], env)]["data"])
        if op == "aread":
            arr = self.heap[self.ev(e.args[0], env)]["data"]
            return arr[E.to_signed(self.ev(e.args[1], env))]
        if op == "classid":
            cls = self.heap[self.ev(e.args[0], env)]["@class"]
            return self.prog.class_ids.get(cls, 0)
        if op == "new":
            return self.alloc(e.val)
        if op == "newarray":
            return self.alloc_array([0] * E.to_signed(self.ev(e.args[0], env)))
        if op == "nondet":
            return self.nondet(*e.val)
        if op == "ite":
            return self.ev(e.args[1] if self.ev(e.args[0], env) else e.args[2], env)
        args = [self.ev(a, env) for a in e.args]
        return E._eval_node(e, args, lambda s: None)

    def store(self, lhs: E.Expr, v: Any, env: dict) -> None:
        if lhs.op == "sym":
            if lhs.val in self.globals or lhs.val.startswith(START + "::"):
                self.globals[lhs.val] = v
            else:
                env[lhs.val] = v
        elif lhs.op == "field":
            self.heap[self.ev(lhs.args[0], env)][lhs.val] = v
        elif lhs.op == "aread":
            arr = self.heap[self.ev(lhs.args[0], env)]["data"]
            arr[E.to_signed(self.ev(lhs.args[1], env))] = v
        else:
            raise ValueError(f"cannot assign to {lhs.op}")

    # -------------------------------------------------------- execution
    def call(self, name: str, args: list) -> Any:
        fn = self.prog.functions[name]
        env = {p.val: a for p, a in zip(fn.params, args)}
        labels = fn.label_index()
        pc = 0
        while pc < len(fn.body):
            self.fuel -= 1
            if self.fuel < 0:
                raise Stop("fuel_exhausted")
            ins = fn.body[pc]
            pc += 1
            if isinstance(ins, Assign):
                self.store(ins.lhs, self.ev(ins.rhs, env), env)
            elif isinstance(ins, Goto):
                if self.ev(ins.guard, env):
                    pc = labels[ins.target]
            elif isinstance(ins, Assert):
                if not self.ev(ins.cond, env):
                    raise Stop("violated", ins.prop.pid)
            elif isinstance(ins, Assume):
                if not self.ev(ins.cond, env):
                    raise Stop("pruned")
            elif isinstance(ins, Call):
                v = self.call(ins.func, [self.ev(a, env) for a in ins.args])
                if ins.lhs is not None and not self.globals[THROWN.val]:
                    self.store(ins.lhs, v, env)
            elif isinstance(ins, Return):
                return None if ins.value is None else self.ev(ins.value, env)
            elif not isinstance(ins, Skip):
                raise ValueError(f"unexpected instruction {type(ins).__name__}")
        return env.get(fn.ret.val) if fn.ret is not None else None

    def run(self) -> tuple[str, Any]:
        try:
            self.call(START, [])
        except Stop as s:
            return (s.kind, s.pid)
        ret = [v for k, v in self.globals.items() if k == f"{START}::return"]
        return ("returned", ret[0] if ret else None)


def run_goto(prog: GotoProgram, feed: list, fuel: int = 200_000) -> tuple[str, Any]:
    return GotoRunner(prog, feed, fuel).run()
