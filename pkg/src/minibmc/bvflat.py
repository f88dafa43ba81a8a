"""Bit-blasting of boolean / bit-vector / array expressions to CNF.

Every node is flattened once (memoised by identity) into a literal vector,
least significant bit first.  Gates are Tseitin-encoded and fold constant
inputs, so circuits over literals collapse where operands are known.

String-sorted terms are not bit-blasted here beyond their length and the
individual characters that are read; string function applications are given
fresh result literals and recorded in :attr:`CnfFormula.apps` for the string
solver to axiomatise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable

from . import expr as E
from .expr import BOOL, CHAR, INT, STRING, Expr

TRUE_LIT = 1
FALSE_LIT = -1


class FlattenError(Exception):
    pass


@dataclass
class StrApp:
    """A string function application left uninterpreted by the flattener."""

    kind: str            # copy | literal | concat | substring | insert | of_int | indexof | equals | startswith
    result: Expr         # string symbol for string-valued apps, the app node itself otherwise
    args: tuple
    act: Expr            # activation condition (TRUE for total apps)
    node: Expr


@dataclass
class CnfFormula:
    num_vars: int = 1
    clauses: list = field(default_factory=lambda: [[TRUE_LIT]])
    bitmap: dict = field(default_factory=dict)
    apps: list = field(default_factory=list)

    def dimacs(self) -> str:
        from .satcore import write_dimacs
        return write_dimacs(self.num_vars, self.clauses)


class Flattener:
    """Incremental flattener; clauses accumulate in :attr:`cnf`."""

    def __init__(self, max_array_length: int = 16, max_string_length: int = 16):
        self.max_array_length = max_array_length
        self.max_string_length = max_string_length
        self.cnf = CnfFormula()
        self.strings: dict[int, Expr] = {}
        self.str_len: dict[int, list[int]] = {}
        self.str_cells: dict[int, dict[int, list[int]]] = {}
        self.char_reads: dict[int, list[Expr]] = {}
        self._act_syms = 0

    # ---------------------------------------------------------------- gates
    def new_var(self) -> int:
        self.cnf.num_vars += 1
        return self.cnf.num_vars

    def new_vec(self, width: int) -> list[int]:
        return [self.new_var() for _ in range(width)]

    def clause(self, *lits: int) -> None:
        out = []
        for lit in lits:
            if lit == TRUE_LIT:
                return
            if lit == FALSE_LIT:
                continue
            out.append(lit)
        self.cnf.clauses.append(out)

    def AND(self, *xs: int) -> int:
        lits: list[int] = []
        seen: set[int] = set()
        for x in xs:
            if x == FALSE_LIT or -x in seen:
                return FALSE_LIT
            if x == TRUE_LIT or x in seen:
                continue
            seen.add(x)
            lits.append(x)
        if not lits:
            return TRUE_LIT
        if len(lits) == 1:
            return lits[0]
        o = self.new_var()
        cl = self.cnf.clauses
        for x in lits:
            cl.append([-o, x])
        cl.append([o] + [-x for x in lits])
        return o

    def OR(self, *xs: int) -> int:
        return -self.AND(*(-x for x in xs))

    def XOR(self, a: int, b: int) -> int:
        if a == FALSE_LIT:
            return b
        if b == FALSE_LIT:
            return a
        if a == TRUE_LIT:
            return -b
        if b == TRUE_LIT:
            return -a
        if a == b:
            return FALSE_LIT
        if a == -b:
            return TRUE_LIT
        o = self.new_var()
        self.cnf.clauses.extend(([-o, a, b], [-o, -a, -b], [o, -a, b], [o, a, -b]))
        return o

    def MUX(self, c: int, a: int, b: int) -> int:
        """c ? a : b"""
        if c == TRUE_LIT or a == b:
            return a
        if c == FALSE_LIT:
            return b
        if a == TRUE_LIT and b == FALSE_LIT:
            return c
        if a == FALSE_LIT and b == TRUE_LIT:
            return -c
        if a == TRUE_LIT:
            return self.OR(c, b)
        if a == FALSE_LIT:
            return self.AND(-c, b)
        if b == TRUE_LIT:
            return self.OR(-c, a)
        if b == FALSE_LIT:
            return self.AND(c, a)
        o = self.new_var()
        self.cnf.clauses.extend(([-c, -a, o], [-c, a, -o], [c, -b, o], [c, b, -o], [-a, -b, o], [a, b, -o]))
        return o

    def MAJ(self, a: int, b: int, c: int) -> int:
        for x, y, z in ((a, b, c), (b, c, a), (c, a, b)):
            if z == FALSE_LIT:
                return self.AND(x, y)
            if z == TRUE_LIT:
                return self.OR(x, y)
        if a == b:
            return a
        if a == -b:
            return c
        o = self.new_var()
        self.cnf.clauses.extend(([-a, -b, o], [-a, -c, o], [-b, -c, o], [a, b, -o], [a, c, -o], [b, c, -o]))
        return o

    # --------------------------------------------------------- word circuits
    @staticmethod
    def const_vec(v: int, width: int) -> list[int]:
        return [TRUE_LIT if (v >> k) & 1 else FALSE_LIT for k in range(width)]

    def adder(self, a: list[int], b: list[int], cin: int = FALSE_LIT) -> tuple[list[int], int]:
        out = []
        c = cin
        for x, y in zip(a, b):
            out.append(self.XOR(self.XOR(x, y), c))
            c = self.MAJ(x, y, c)
        return out, c

    def subtract(self, a: list[int], b: list[int]) -> tuple[list[int], int]:
        """a - b; the carry is 1 iff a >=u b."""
        return self.adder(a, [-x for x in b], TRUE_LIT)

    def negate(self, a: list[int]) -> list[int]:
        return self.subtract(self.const_vec(0, len(a)), a)[0]

    def multiply(self, a: list[int], b: list[int], width: int) -> list[int]:
        """Shift-add multiplier truncated to ``width`` bits (inputs zero-extended)."""
        a = a + [FALSE_LIT] * (width - len(a))
        acc = self.const_vec(0, width)
        for i, bi in enumerate(b[:width]):
            if bi == FALSE_LIT:
                continue
            part = [self.AND(bi, a[j]) for j in range(width - i)]
            acc[i:] = self.adder(acc[i:], part)[0]
        return acc

    def ult(self, a: list[int], b: list[int]) -> int:
        return -self.subtract(a, b)[1]

    def slt(self, a: list[int], b: list[int]) -> int:
        return self.ult(a[:-1] + [-a[-1]], b[:-1] + [-b[-1]])

    def veq(self, a: list[int], b: list[int]) -> int:
        return self.AND(*(-self.XOR(x, y) for x, y in zip(a, b)))

    def vmux(self, c: int, a: list[int], b: list[int]) -> list[int]:
        return [self.MUX(c, x, y) for x, y in zip(a, b)]

    def vabs(self, a: list[int]) -> list[int]:
        return self.vmux(a[-1], self.negate(a), a)

    def udivmod(self, n: list[int], d: list[int]) -> tuple[list[int], list[int]]:
        """Unsigned division by the constraint q*d + r = n, r < d (d = 0 gives q = 0, r = n)."""
        w = len(n)
        if all(abs(x) == 1 for x in n + d):
            nv = sum(1 << k for k, x in enumerate(n) if x == TRUE_LIT)
            dv = sum(1 << k for k, x in enumerate(d) if x == TRUE_LIT)
            q, r = (nv // dv, nv % dv) if dv else (0, nv)
            return self.const_vec(q, w), self.const_vec(r, w)
        q = self.new_vec(w)
        r = self.new_vec(w)
        dz = -self.OR(*d)
        prod = self.multiply(q, d, 2 * w)
        total, _ = self.adder(prod, r + [FALSE_LIT] * w)
        exact = self.veq(total, n + [FALSE_LIT] * w)
        nonzero_ok = self.AND(exact, self.ult(r, d))
        zero_ok = self.AND(self.veq(q, self.const_vec(0, w)), self.veq(r, n))
        self.clause(self.MUX(dz, zero_ok, nonzero_ok))
        return q, r

    def sdivmod(self, n: list[int], d: list[int]) -> tuple[list[int], list[int]]:
        """Java division: quotient truncates toward zero, remainder takes the sign of n."""
        mq, mr = self.udivmod(self.vabs(n), self.vabs(d))
        qneg = self.XOR(n[-1], d[-1])
        return self.vmux(qneg, self.negate(mq), mq), self.vmux(n[-1], self.negate(mr), mr)

    def select_cells(self, cells: list[list[int]], idx: list[int], width: int) -> list[int]:
        out = self.const_vec(0, width)
        for k in range(len(cells) - 1, -1, -1):
            hit = self.veq(idx, self.const_vec(k, len(idx)))
            out = self.vmux(hit, cells[k], out)
        return out

    # ------------------------------------------------------------- strings
    def string_var(self, s: Expr) -> None:
        key = id(s)
        if key in self.strings:
            return
        if s.sort != STRING:
            raise FlattenError(f"not a string: {s}")
        self.strings[key] = s
        self.char_reads[key] = []
        if s.op == "sapp" and s.val[0] == "literal":
            text = s.val[1]
            if len(text) > self.max_string_length:
                raise FlattenError(f"string literal longer than max string length: {text!r}")
            self.str_len[key] = self.const_vec(len(text), 32)
            self.str_cells[key] = {k: self.const_vec(ord(ch), 16) for k, ch in enumerate(text)}
            return
        length = self.new_vec(32)
        self.str_len[key] = length
        self.str_cells[key] = {}
        # 0 <= length <= max_string_length
        self.clause(-length[31])
        self.clause(-self.ult(self.const_vec(self.max_string_length, 32), length))
        if s.op == "sapp":
            # a string-valued application used in place: its result is itself
            self.cnf.apps.append(StrApp(s.val[0], s, s.args, E.TRUE, s))
        elif s.op != "sym":
            raise FlattenError(f"unsupported string term {s.op}")

    def cell(self, s: Expr, k: int) -> list[int]:
        self.string_var(s)
        cells = self.str_cells[id(s)]
        if k not in cells:
            if s.op == "sapp" and s.val[0] == "literal":
                return self.const_vec(0, 16)
            cells[k] = self.new_vec(16)
        return cells[k]

    def lit_expr(self, lit: int) -> Expr:
        """A boolean symbol bound to an existing literal."""
        self._act_syms += 1
        e = E.sym(f"@act{self._act_syms}", BOOL)
        self.cnf.bitmap[id(e)] = lit
        return e

    def _string_eq(self, lhs: Expr, rhs: Expr) -> int:
        """Literal whose truth forces lhs == rhs (one-directional definition)."""
        if rhs.op == "ite":
            c, a, b = rhs.args
            cl = self.lit(c)
            return self.MUX(cl, self._string_eq(lhs, a), self._string_eq(lhs, b))
        self.string_var(lhs)
        act = self.new_var()
        if rhs.op == "sapp" and rhs.val[0] != "literal":
            kind, args = rhs.val[0], rhs.args
        else:
            kind, args = "copy", (rhs,)
            if rhs.op == "sapp":
                kind = "literal"
        for a in args:
            if a.sort == STRING:
                self.string_var(a)
        self.cnf.apps.append(StrApp(kind, lhs, args, self.lit_expr(act), rhs))
        return act

    # ------------------------------------------------------------ flatten
    def lit(self, e: Expr) -> int:
        if e.sort != BOOL:
            raise FlattenError(f"expected boolean, got {e.sort}")
        return self.flatten_node(e)

    def bits(self, e: Expr) -> list[int]:
        return self.flatten_node(e)

    def flatten(self, vc: Expr) -> int:
        """Flatten a boolean formula; returns its root literal (not asserted)."""
        return self.lit(vc)

    def assert_expr(self, e: Expr) -> None:
        self.clause(self.lit(e))

    def flatten_node(self, root: Expr) -> Any:
        bitmap = self.cnf.bitmap
        if id(root) in bitmap:
            return bitmap[id(root)]
        stack = [root]
        while stack:
            n = stack[-1]
            if id(n) in bitmap:
                stack.pop()
                continue
            kids = [a for a in self._children(n) if id(a) not in bitmap]
            if kids:
                stack.extend(kids)
                continue
            bitmap[id(n)] = self._node(n)
            stack.pop()
        return bitmap[id(root)]

    @staticmethod
    def _children(n: Expr) -> Iterable[Expr]:
        if n.op == "eq" and n.args[0].sort == STRING:
            return ()
        if n.op in ("strlen",):
            return ()
        if n.op == "strchar":
            return (n.args[1],)
        if n.op == "sapp":
            return tuple(a for a in n.args if a.sort != STRING)
        return n.args

    def _node(self, n: Expr) -> Any:
        op = n.op
        bm = self.cnf.bitmap
        a = [bm.get(id(x)) for x in n.args]
        sort = n.sort
        w = sort.width
        if op == "const":
            if sort == BOOL:
                return TRUE_LIT if n.val else FALSE_LIT
            if sort.kind == "array":
                return [self.const_vec(n.val, w)] * self.max_array_length
            return self.const_vec(n.val, w)
        if op == "sym":
            if sort == BOOL:
                return self.new_var()
            if sort.kind == "array":
                return [self.new_vec(w) for _ in range(self.max_array_length)]
            if sort == STRING:
                raise FlattenError("string symbol used as a value")
            return self.new_vec(w)
        if op == "not":
            return -a[0]
        if op == "and":
            return self.AND(*a)
        if op == "or":
            return self.OR(*a)
        if op == "ite":
            c, x, y = a
            if sort == BOOL:
                return self.MUX(c, x, y)
            if sort.kind == "array":
                return [self.vmux(c, p, q) for p, q in zip(x, y)]
            if sort == STRING:
                raise FlattenError("string ite outside an equation")
            return self.vmux(c, x, y)
        if op == "eq":
            x, y = n.args
            if x.sort == STRING:
                return self._string_eq(x, y)
            if x.sort == BOOL:
                return -self.XOR(a[0], a[1])
            if x.sort.kind == "array":
                return self.AND(*(self.veq(p, q) for p, q in zip(a[0], a[1])))
            return self.veq(a[0], a[1])
        if op == "add":
            return self.adder(a[0], a[1])[0]
        if op == "sub":
            return self.subtract(a[0], a[1])[0]
        if op == "neg":
            return self.negate(a[0])
        if op == "mul":
            return self.multiply(a[0], a[1], w)
        if op in ("sdiv", "srem"):
            q, r = self.sdivmod(a[0], a[1])
            return q if op == "sdiv" else r
        if op in ("udiv", "urem"):
            q, r = self.udivmod(a[0], a[1])
            return q if op == "udiv" else r
        if op == "slt":
            return self.slt(a[0], a[1])
        if op == "sle":
            return -self.slt(a[1], a[0])
        if op == "ult":
            return self.ult(a[0], a[1])
        if op == "ule":
            return -self.ult(a[1], a[0])
        if op == "zext":
            return a[0] + [FALSE_LIT] * (w - len(a[0]))
        if op == "sext":
            return a[0] + [a[0][-1]] * (w - len(a[0]))
        if op == "trunc":
            return a[0][:w]
        if op == "toref":
            return a[0]
        if op == "select":
            return self.select_cells(a[0], a[1], w)
        if op == "store":
            cells, idx, v = a
            return [self.vmux(self.veq(idx, self.const_vec(k, len(idx))), v, c)
                    for k, c in enumerate(cells)]
        if op == "strlen":
            s = n.args[0]
            self.string_var(s)
            return self.str_len[id(s)]
        if op == "strchar":
            s, idx = n.args
            self.string_var(s)
            self.char_reads[id(s)].append(idx)
            if idx.op == "const":
                k = idx.signed
                return self.cell(s, k) if 0 <= k < self.max_string_length else self.const_vec(0, 16)
            cells = [self.cell(s, k) for k in range(self.max_string_length)]
            return self.select_cells(cells, a[1], 16)
        if op == "sapp":
            kind = n.val[0]
            for x in n.args:
                if x.sort == STRING:
                    self.string_var(x)
            if sort == STRING:
                self.string_var(n)
                return []
            res = self.new_var() if sort == BOOL else self.new_vec(w)
            self.cnf.apps.append(StrApp(kind, n, n.args, E.TRUE, n))
            return res
        raise FlattenError(f"unsupported expression kind {op!r}")

    # --------------------------------------------------------------- models
    def value(self, e: Expr, model) -> Any:
        """Decode a flattened node under ``model`` (sequence indexed by variable)."""
        return decode(self.cnf.bitmap[id(e)], e.sort, model)


def lit_value(lit: int, model) -> bool:
    v = bool(model[abs(lit)]) if abs(lit) != 1 else True
    return v if lit > 0 else not v


def decode(lits: Any, sort: E.Sort, model) -> Any:
    if sort == BOOL:
        return lit_value(lits, model)
    if sort.kind == "array":
        return tuple(decode(c, E.bv(sort.width), model) for c in lits)
    return sum(1 << k for k, x in enumerate(lits) if lit_value(x, model))


def eval_model(cnf: CnfFormula, assignment, nodes: Iterable[Expr]) -> dict[int, Any]:
    """Decode the given flattened nodes; keys are node ids."""
    return {id(n): decode(cnf.bitmap[id(n)], n.sort, assignment) for n in nodes if id(n) in cnf.bitmap}
