"""Random loop-bearing MJB programs for differential testing.

Every program is a static ``Gen.main`` over int locals.  Nondet values
(parameters and ``nondet_int`` calls, at most three in total) are assumed to
lie in [-2, 2], so the bounded model checker explores exactly the inputs the
interpreter enumerates.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

LO, HI = -2, 2
CMP = ("eq", "ne", "lt", "le", "gt", "ge")
NEGATE = {"eq": "ne", "ne": "eq", "lt": "ge", "ge": "lt", "le": "gt", "gt": "le"}


@dataclass
class Generated:
    text: str
    params: int
    nondets: int


class _Gen:
    def __init__(self, rng: random.Random):
        self.rng = rng
        self.nvars = rng.randint(2, 4)
        self.params = rng.randint(0, 2)
        self.budget = 3 - self.params        # remaining nondet_int calls
        self.code: list[str] = []
        self.line = 1
        self.labels = 0
        self.loops = 0

    def label(self) -> str:
        self.labels += 1
        return f"L{self.labels}"

    def emit(self, ins: str) -> None:
        self.code.append(f"    {ins} @ {self.line}")

    def place(self, lbl: str) -> None:
        self.code.append(f"   {lbl}:")

    def next_line(self) -> None:
        self.line += 1

    # ---------------------------------------------------------- expressions
    def expr(self, depth: int = 0) -> None:
        r = self.rng.random()
        if depth >= 2 or r < 0.35:
            self.emit(f"load {self.rng.randrange(self.nvars)}")
        elif r < 0.5:
            self.emit(f"const {self.rng.randint(LO, HI)}")
        else:
            op = self.rng.choice(("add", "add", "sub", "sub", "mul", "div", "rem", "neg"))
            self.expr(depth + 1)
            if op != "neg":
                self.expr(depth + 1)
            self.emit(op)

    def branch_unless(self, target: str) -> None:
        """Evaluate a random comparison; jump to ``target`` when it is false."""
        op = self.rng.choice(CMP)
        self.expr(1)
        self.expr(1)
        self.emit(f"if_{NEGATE[op]} {target}")

    def bool_value(self) -> None:
        """Push 1 if a random comparison holds, else 0."""
        f, j = self.label(), self.label()
        self.branch_unless(f)
        self.emit("const 1")
        self.emit(f"goto {j}")
        self.place(f)
        self.emit("const 0")
        self.place(j)

    def in_range(self, slot: int) -> None:
        bad, j = self.label(), self.label()
        self.emit(f"load {slot}")
        self.emit(f"const {LO}")
        self.emit(f"if_lt {bad}")
        self.emit(f"load {slot}")
        self.emit(f"const {HI}")
        self.emit(f"if_gt {bad}")
        self.emit("const 1")
        self.emit(f"goto {j}")
        self.place(bad)
        self.emit("const 0")
        self.place(j)
        self.emit("assume")

    # ----------------------------------------------------------- statements
    def stmt(self, depth: int) -> None:
        self.next_line()
        r = self.rng.random()
        if self.budget and depth == 0 and r < 0.25:
            self.budget -= 1
            slot = self.rng.randrange(self.nvars)
            self.emit("nondet_int")
            self.emit(f"store {slot}")
            self.in_range(slot)
        elif r < 0.45:
            self.expr()
            self.emit(f"store {self.rng.randrange(self.nvars)}")
        elif r < 0.6 and depth < 2:
            els, end = self.label(), self.label()
            self.branch_unless(els)
            self.block(depth + 1)
            self.emit(f"goto {end}")
            self.place(els)
            if self.rng.random() < 0.5:
                self.block(depth + 1)
            self.place(end)
        elif r < 0.8 and depth < 2 and self.loops < 2:
            self.loops += 1
            head, exit_ = self.label(), self.label()
            self.place(head)
            self.branch_unless(exit_)
            self.block(depth + 1)
            self.next_line()
            # a counter that moves keeps many loops finite, but not all
            if self.rng.random() < 0.7:
                slot = self.rng.randrange(self.nvars)
                self.emit(f"load {slot}")
                self.emit(f"const {self.rng.choice((1, -1))}")
                self.emit("add")
                self.emit(f"store {slot}")
            self.emit(f"goto {head}")
            self.place(exit_)
        else:
            self.bool_value()
            self.emit("assert")

    def block(self, depth: int) -> None:
        for _ in range(self.rng.randint(1, 3)):
            self.stmt(depth)

    def program(self) -> Generated:
        for slot in range(self.params):
            self.in_range(slot)
        for slot in range(self.params, self.nvars):
            self.emit("const 0")
            self.emit(f"store {slot}")
        self.block(0)
        # make sure there is at least one loop
        if not self.loops:
            self.loops = 1
            head, exit_ = self.label(), self.label()
            self.next_line()
            self.place(head)
            self.branch_unless(exit_)
            self.stmt(2)
            self.emit(f"goto {head}")
            self.place(exit_)
        self.next_line()
        self.bool_value()
        self.emit("assert")
        self.next_line()
        self.emit("return")
        names = ", ".join(f"x{k}" for k in range(self.nvars))
        sig = ", ".join(["int"] * self.params)
        body = "\n".join(self.code)
        text = (f"class Gen {{\n  static method main({sig}) locals {self.nvars} ({names}) {{\n"
                f"{body}\n  }}\n}}\n")
        return Generated(text, self.params, 3 - self.params - self.budget)


def random_program(rng: random.Random) -> Generated:
    return _Gen(rng).program()
