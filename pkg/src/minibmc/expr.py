"""Hash-consed expression DAG shared by the GOTO IR, SSA and the flattener.

Nodes are interned: structurally equal expressions are the same object, so
identity can be used as a memo key everywhere downstream.  Constructors fold
constants and apply a handful of boolean identities; nothing deeper.
"""

from __future__ import annotations

from typing import Any, Callable, Iterable, NamedTuple


class Sort(NamedTuple):
    kind: str   # bool | bv | ref | array | string
    width: int

    def __str__(self) -> str:
        if self.kind == "bv":
            return f"bv{self.width}"
        return self.kind


BOOL = Sort("bool", 1)
INT = Sort("bv", 32)
CHAR = Sort("bv", 16)
REF = Sort("ref", 32)
ARRAY = Sort("array", 32)
STRING = Sort("string", 16)


def bv(width: int) -> Sort:
    return Sort("bv", width)


def is_bv(sort: Sort) -> bool:
    return sort.kind in ("bv", "ref")


def mask(width: int) -> int:
    return (1 << width) - 1


def to_signed(v: int, width: int = 32) -> int:
    v &= mask(width)
    return v - (1 << width) if v >> (width - 1) else v


class Expr:
    __slots__ = ("op", "args", "sort", "val", "__weakref__")

    def __init__(self, op: str, args: tuple, sort: Sort, val: Any):
        self.op = op
        self.args = args
        self.sort = sort
        self.val = val

    def __repr__(self) -> str:
        return to_str(self)

    @property
    def is_const(self) -> bool:
        return self.op == "const"

    @property
    def signed(self) -> int:
        return to_signed(self.val, self.sort.width)


_table: dict[tuple, Expr] = {}


def _mk(op: str, args: tuple, sort: Sort, val: Any = None) -> Expr:
    key = (op, sort, val, tuple(map(id, args)))
    e = _table.get(key)
    if e is None:
        e = Expr(op, args, sort, val)
        _table[key] = e
    return e


# ---------------------------------------------------------------- leaves

def const(v: int | bool, sort: Sort = INT) -> Expr:
    if sort == BOOL:
        return _mk("const", (), BOOL, bool(v))
    if sort.kind in ("bv", "ref"):
        return _mk("const", (), sort, int(v) & mask(sort.width))
    if sort.kind == "array":
        # every element equals v
        return _mk("const", (), sort, int(v) & mask(sort.width))
    raise TypeError(f"no constants of sort {sort}")


TRUE = const(True, BOOL)
FALSE = const(False, BOOL)
NULL = const(0, REF)


def sym(name: str, sort: Sort) -> Expr:
    return _mk("sym", (), sort, name)


def intc(v: int) -> Expr:
    return const(v, INT)


# ---------------------------------------------------------------- boolean

def not_(a: Expr) -> Expr:
    if a.op == "const":
        return FALSE if a.val else TRUE
    if a.op == "not":
        return a.args[0]
    return _mk("not", (a,), BOOL)


def and_(*xs: Expr) -> Expr:
    out: list[Expr] = []
    seen: set[int] = set()
    for x in _flatten("and", xs):
        if x.op == "const":
            if not x.val:
                return FALSE
            continue
        if id(x) in seen:
            continue
        if x.op == "not" and id(x.args[0]) in seen:
            return FALSE
        if id(not_(x)) in seen:
            return FALSE
        seen.add(id(x))
        out.append(x)
    if not out:
        return TRUE
    if len(out) == 1:
        return out[0]
    return _mk("and", tuple(out), BOOL)


def or_(*xs: Expr) -> Expr:
    out: list[Expr] = []
    seen: set[int] = set()
    for x in _flatten("or", xs):
        if x.op == "const":
            if x.val:
                return TRUE
            continue
        if id(x) in seen:
            continue
        if id(not_(x)) in seen:
            return TRUE
        seen.add(id(x))
        out.append(x)
    if not out:
        return FALSE
    if len(out) == 1:
        return out[0]
    return _mk("or", tuple(out), BOOL)


def _flatten(op: str, xs: Iterable[Expr]):
    for x in xs:
        if x.op == op:
            yield from x.args
        else:
            yield x


def implies(a: Expr, b: Expr) -> Expr:
    return or_(not_(a), b)


def ite(c: Expr, a: Expr, b: Expr) -> Expr:
    if a.sort != b.sort:
        raise TypeError(f"ite branches differ: {a.sort} vs {b.sort}")
    if c.op == "const":
        return a if c.val else b
    if a is b:
        return a
    if c.op == "not":
        return ite(c.args[0], b, a)
    if a.sort == BOOL:
        if a is TRUE and b is FALSE:
            return c
        if a is FALSE and b is TRUE:
            return not_(c)
    return _mk("ite", (c, a, b), a.sort)


def eq(a: Expr, b: Expr) -> Expr:
    if a.sort.kind != b.sort.kind or a.sort.width != b.sort.width:
        raise TypeError(f"eq over different sorts: {a.sort} vs {b.sort}")
    if a is b:
        return TRUE
    if a.op == "const" and b.op == "const" and a.sort.kind != "array":
        return TRUE if a.val == b.val else FALSE
    if a.sort == BOOL:
        if b.op == "const":
            return a if b.val else not_(a)
        if a.op == "const":
            return b if a.val else not_(b)
    return _mk("eq", (a, b), BOOL)


def ne(a: Expr, b: Expr) -> Expr:
    return not_(eq(a, b))


# ---------------------------------------------------------------- bit-vector

def _fold2(op: str, a: Expr, b: Expr, sort: Sort) -> Expr | None:
    if a.op == "const" and b.op == "const":
        return const(BV_OPS[op](a.val, b.val, a.sort.width), sort)
    return None


def _binop(op: str, a: Expr, b: Expr) -> Expr:
    if a.sort.width != b.sort.width or not (is_bv(a.sort) and is_bv(b.sort)):
        raise TypeError(f"{op} over {a.sort}, {b.sort}")
    return _fold2(op, a, b, a.sort) or _mk(op, (a, b), a.sort)


def add(a: Expr, b: Expr) -> Expr:
    if b.op == "const" and b.val == 0:
        return a
    if a.op == "const" and a.val == 0:
        return b
    return _binop("add", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if b.op == "const" and b.val == 0:
        return a
    if a is b:
        return const(0, a.sort)
    return _binop("sub", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    return _binop("mul", a, b)


def sdiv(a: Expr, b: Expr) -> Expr:
    return _binop("sdiv", a, b)


def srem(a: Expr, b: Expr) -> Expr:
    return _binop("srem", a, b)


def udiv(a: Expr, b: Expr) -> Expr:
    return _binop("udiv", a, b)


def urem(a: Expr, b: Expr) -> Expr:
    return _binop("urem", a, b)


def neg(a: Expr) -> Expr:
    if a.op == "const":
        return const(-a.val, a.sort)
    return _mk("neg", (a,), a.sort)


def _cmp(op: str, a: Expr, b: Expr) -> Expr:
    if a.sort.width != b.sort.width:
        raise TypeError(f"{op} over {a.sort}, {b.sort}")
    if a.op == "const" and b.op == "const":
        return TRUE if CMP_OPS[op](a.val, b.val, a.sort.width) else FALSE
    if a is b:
        return TRUE if op in ("sle", "ule") else FALSE
    return _mk(op, (a, b), BOOL)


def slt(a, b):
    return _cmp("slt", a, b)


def sle(a, b):
    return _cmp("sle", a, b)


def sgt(a, b):
    return _cmp("slt", b, a)


def sge(a, b):
    return _cmp("sle", b, a)


def ult(a, b):
    return _cmp("ult", a, b)


def ule(a, b):
    return _cmp("ule", a, b)


def zext(a: Expr, width: int) -> Expr:
    if a.sort.width == width:
        return a
    if a.op == "const":
        return const(a.val, bv(width))
    return _mk("zext", (a,), bv(width), width)


def sext(a: Expr, width: int) -> Expr:
    if a.sort.width == width:
        return a
    if a.op == "const":
        return const(to_signed(a.val, a.sort.width), bv(width))
    return _mk("sext", (a,), bv(width), width)


def trunc(a: Expr, width: int) -> Expr:
    if a.sort.width == width:
        return a
    if a.op == "const":
        return const(a.val, bv(width))
    if a.op == "zext" and a.args[0].sort.width == width:
        return a.args[0]
    return _mk("trunc", (a,), bv(width), width)


def as_ref(a: Expr) -> Expr:
    if a.sort == REF:
        return a
    if a.op == "const":
        return const(a.val, REF)
    return _mk("toref", (a,), REF)


# ---------------------------------------------------------------- arrays

def select(arr: Expr, idx: Expr) -> Expr:
    if arr.sort.kind != "array":
        raise TypeError("select on non-array")
    if arr.op == "const":
        return const(arr.val, bv(arr.sort.width))
    if arr.op == "store" and idx.op == "const" and arr.args[1].op == "const":
        if arr.args[1].val == idx.val:
            return arr.args[2]
        return select(arr.args[0], idx)
    return _mk("select", (arr, idx), bv(arr.sort.width))


def store(arr: Expr, idx: Expr, v: Expr) -> Expr:
    return _mk("store", (arr, idx, v), arr.sort)


# ---------------------------------------------------------------- strings

def _is_literal(s: Expr) -> bool:
    return s.op == "sapp" and s.val[0] == "literal"


def strlen(s: Expr) -> Expr:
    assert s.sort == STRING
    if _is_literal(s):
        return intc(len(s.val[1]))
    return _mk("strlen", (s,), INT)


def strchar(s: Expr, idx: Expr) -> Expr:
    assert s.sort == STRING and idx.sort == INT
    if _is_literal(s) and idx.op == "const" and 0 <= idx.signed < len(s.val[1]):
        return const(ord(s.val[1][idx.signed]), CHAR)
    return _mk("strchar", (s, idx), CHAR)


STRING_APPS = {
    # kind: result sort
    "indexof": INT, "equals": BOOL, "startswith": BOOL,
    "substring": STRING, "concat": STRING, "insert": STRING, "of_int": STRING,
    "literal": STRING,
}


def sapp(kind: str, *args: Expr, val: Any = None) -> Expr:
    if kind not in STRING_APPS:
        raise ValueError(f"unsupported string operation {kind!r}")
    if kind != "literal" and all(_is_literal(a) or a.op == "const" for a in args):
        folded = _fold_sapp(kind, args)
        if folded is not None:
            return folded
    return _mk("sapp", tuple(args), STRING_APPS[kind], (kind, val))


def _fold_sapp(kind: str, args: tuple) -> Expr | None:
    vals = [a.val[1] if a.sort == STRING else a.val for a in args]
    if kind == "substring":
        b, e = to_signed(vals[1]), to_signed(vals[2])
        if not 0 <= b <= e <= len(vals[0]):
            return None
    if kind == "insert" and not 0 <= to_signed(vals[2]) <= len(vals[0]):
        return None
    r = _eval_sapp(kind, None, vals)
    sort = STRING_APPS[kind]
    if sort == STRING:
        return str_literal(r)
    return const(r, sort)


def str_literal(text: str) -> Expr:
    return sapp("literal", val=text)


# ---------------------------------------------------------------- semantics

def _sdiv(a: int, b: int, w: int) -> int:
    a, b = to_signed(a, w), to_signed(b, w)
    if b == 0:
        return 0
    q = abs(a) // abs(b)
    return -q if (a < 0) != (b < 0) else q


def _srem(a: int, b: int, w: int) -> int:
    sa, sb = to_signed(a, w), to_signed(b, w)
    if sb == 0:
        return sa
    r = abs(sa) % abs(sb)
    return -r if sa < 0 else r


BV_OPS: dict[str, Callable[[int, int, int], int]] = {
    "add": lambda a, b, w: a + b,
    "sub": lambda a, b, w: a - b,
    "mul": lambda a, b, w: a * b,
    "sdiv": _sdiv,
    "srem": _srem,
    "udiv": lambda a, b, w: a // b if b else 0,
    "urem": lambda a, b, w: a % b if b else a,
}

CMP_OPS: dict[str, Callable[[int, int, int], bool]] = {
    "slt": lambda a, b, w: to_signed(a, w) < to_signed(b, w),
    "sle": lambda a, b, w: to_signed(a, w) <= to_signed(b, w),
    "ult": lambda a, b, w: a < b,
    "ule": lambda a, b, w: a <= b,
}


def java_index_of(s: str, c: int, start: int) -> int:
    start = max(start, 0)
    for i in range(start, len(s)):
        if ord(s[i]) == c:
            return i
    return -1


def evaluate(e: Expr, env: Callable[[Expr], Any], memo: dict | None = None) -> Any:
    """Concrete value of ``e``; ``env`` supplies values for leaf symbols.

    bv/ref values are unsigned ints, booleans are bools, strings are Python
    ``str`` and arrays are tuples (reads past the end yield 0).
    """
    if memo is None:
        memo = {}
    stack = [e]
    while stack:
        n = stack[-1]
        if id(n) in memo:
            stack.pop()
            continue
        pending = [a for a in n.args if id(a) not in memo]
        if pending and n.op != "ite":
            stack.extend(pending)
            continue
        if n.op == "ite":
            c = n.args[0]
            if id(c) not in memo:
                stack.append(c)
                continue
            branch = n.args[1] if memo[id(c)] else n.args[2]
            if id(branch) not in memo:
                stack.append(branch)
                continue
            memo[id(n)] = memo[id(branch)]
            stack.pop()
            continue
        memo[id(n)] = _eval_node(n, [memo[id(a)] for a in n.args], env)
        stack.pop()
    return memo[id(e)]


def _eval_node(n: Expr, a: list, env) -> Any:
    op = n.op
    w = n.sort.width
    if op == "const":
        return n.val
    if op == "sym":
        return env(n)
    if op == "not":
        return not a[0]
    if op == "and":
        return all(a)
    if op == "or":
        return any(a)
    if op == "eq":
        return a[0] == a[1]
    if op in BV_OPS:
        return BV_OPS[op](a[0], a[1], w) & mask(w)
    if op == "neg":
        return -a[0] & mask(w)
    if op in CMP_OPS:
        return CMP_OPS[op](a[0], a[1], n.args[0].sort.width)
    if op == "zext":
        return a[0]
    if op == "sext":
        return to_signed(a[0], n.args[0].sort.width) & mask(w)
    if op == "trunc":
        return a[0] & mask(w)
    if op == "toref":
        return a[0]
    if op == "select":
        arr, i = a
        return arr[i] if i < len(arr) else 0
    if op == "store":
        arr, i, v = a
        if i < len(arr):
            arr = arr[:i] + (v,) + arr[i + 1:]
        return arr
    if op == "strlen":
        return len(a[0])
    if op == "strchar":
        s, i = a
        return ord(s[i]) if i < len(s) else 0
    if op == "sapp":
        return _eval_sapp(n.val[0], n.val[1], a)
    raise ValueError(f"cannot evaluate {op}")


def _eval_sapp(kind: str, val: Any, a: list) -> Any:
    if kind == "literal":
        return val
    if kind == "indexof":
        s, c, start = a
        return java_index_of(s, c, to_signed(start)) & mask(32)
    if kind == "equals":
        return a[0] == a[1]
    if kind == "startswith":
        return a[0].startswith(a[1])
    if kind == "concat":
        return a[0] + a[1]
    if kind == "substring":
        s, b, e = a
        return s[to_signed(b):to_signed(e)]
    if kind == "insert":
        s, t, off = a
        off = to_signed(off)
        return s[:off] + t + s[off:]
    if kind == "of_int":
        return str(to_signed(a[0]))
    raise ValueError(kind)


# ---------------------------------------------------------------- traversal

def substitute(e: Expr, mapping: dict[int, Expr], memo: dict | None = None) -> Expr:
    """Replace nodes by identity (``mapping`` keyed by ``id(node)``)."""
    if memo is None:
        memo = {}

    def go(n: Expr) -> Expr:
        r = memo.get(id(n))
        if r is not None:
            return r
        if id(n) in mapping:
            r = mapping[id(n)]
        elif not n.args:
            r = n
        else:
            args = tuple(go(x) for x in n.args)
            r = n if all(x is y for x, y in zip(args, n.args)) else rebuild(n, args)
        memo[id(n)] = r
        return r

    return go(e)


def rebuild(n: Expr, args: tuple) -> Expr:
    op = n.op
    if op in _REBUILD:
        return _REBUILD[op](*args)
    if op in ("zext", "sext", "trunc"):
        return {"zext": zext, "sext": sext, "trunc": trunc}[op](args[0], n.val)
    if op == "sapp":
        return sapp(n.val[0], *args, val=n.val[1])
    return _mk(op, args, n.sort, n.val)


_REBUILD = {
    "not": not_, "and": and_, "or": or_, "ite": ite, "eq": eq,
    "add": add, "sub": sub, "mul": mul, "sdiv": sdiv, "srem": srem,
    "udiv": udiv, "urem": urem, "neg": neg,
    "slt": slt, "sle": sle, "ult": ult, "ule": ule,
    "select": select, "store": store, "strlen": strlen, "strchar": strchar,
    "toref": as_ref,
}


def iter_dag(e: Expr):
    """Yield every node reachable from ``e`` once, children before parents."""
    seen: set[int] = set()
    stack: list[tuple[Expr, bool]] = [(e, False)]
    while stack:
        n, done = stack.pop()
        if done:
            yield n
            continue
        if id(n) in seen:
            continue
        seen.add(id(n))
        stack.append((n, True))
        for a in n.args:
            if id(a) not in seen:
                stack.append((a, False))


def symbols(e: Expr) -> list[Expr]:
    return [n for n in iter_dag(e) if n.op == "sym"]


def size(e: Expr) -> int:
    return sum(1 for _ in iter_dag(e))


# ---------------------------------------------------------------- printing

_INFIX = {
    "add": "+", "sub": "-", "mul": "*", "sdiv": "/", "srem": "%", "udiv": "/u", "urem": "%u",
    "slt": "<", "sle": "<=", "ult": "<u", "ule": "<=u", "eq": "=", "and": "&&", "or": "||",
}


def to_str(e: Expr, depth: int = 0) -> str:
    if depth > 60:
        return "..."
    op = e.op
    r = lambda x: to_str(x, depth + 1)  # noqa: E731
    if op == "const":
        if e.sort == BOOL:
            return "true" if e.val else "false"
        if e.sort == REF:
            return "null" if e.val == 0 else f"&dynamic_object{e.val}"
        if e.sort.kind == "array":
            return f"{{{to_signed(e.val)}...}}"
        return str(to_signed(e.val, e.sort.width))
    if op == "sym":
        return e.val
    if op in _INFIX:
        return "(" + f" {_INFIX[op]} ".join(r(a) for a in e.args) + ")"
    if op == "not":
        return "!" + r(e.args[0])
    if op == "neg":
        return "-" + r(e.args[0])
    if op == "ite":
        c, a, b = e.args
        return f"({r(c)} ? {r(a)} : {r(b)})"
    if op == "select":
        return f"{r(e.args[0])}[{r(e.args[1])}]"
    if op == "store":
        a, i, v = e.args
        return f"{r(a)} with [{r(i)}:={r(v)}]"
    if op == "strlen":
        return f"{r(e.args[0])}.length"
    if op == "strchar":
        return f"{r(e.args[0])}.charArray[{r(e.args[1])}]"
    if op == "sapp":
        kind, val = e.val
        if kind == "literal":
            return '"' + val + '"'
        return f"{kind}(" + ", ".join(r(a) for a in e.args) + ")"
    if op in ("zext", "sext", "trunc"):
        return f"{op}{e.val}({r(e.args[0])})"
    return f"{op}(" + ", ".join(r(a) for a in e.args) + ")"
