"""Random string constraint systems and a brute-force decision oracle."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass

from minibmc import expr as E
from minibmc.expr import INT, STRING

MAX_FREE_LEN = 4
INT_RANGE = range(-1, 5)


@dataclass
class System:
    alphabet: str
    free: list        # free string symbols
    ints: list        # free int symbols
    defs: list        # (symbol, defining expression)
    asserts: list     # boolean constraints
    premises: list    # substring/insert premises

    def constraints(self) -> list:
        """Everything the solver sees, including the domain restrictions."""
        out = []
        for s in self.free:
            out.append(E.sle(E.strlen(s), E.intc(MAX_FREE_LEN)))
            for k in range(MAX_FREE_LEN):
                inside = E.slt(E.intc(k), E.strlen(s))
                ch = E.strchar(s, E.intc(k))
                out.append(E.implies(inside, E.or_(*(E.eq(ch, E.const(ord(c), E.CHAR))
                                                     for c in self.alphabet))))
        for n in self.ints:
            out.append(E.and_(E.sle(E.intc(INT_RANGE[0]), n), E.sle(n, E.intc(INT_RANGE[-1]))))
        out.extend(E.eq(r, d) for r, d in self.defs)
        out.extend(self.premises)
        out.extend(self.asserts)
        return out

    def variables(self) -> list:
        return self.free + self.ints + [r for r, _ in self.defs]

    def text(self) -> str:
        return "\n".join(E.to_str(c) for c in self.premises + self.asserts)


def brute_force(system: System) -> dict | None:
    """A satisfying assignment by enumeration, or None."""
    strings = ["".join(p) for n in range(MAX_FREE_LEN + 1)
               for p in itertools.product(system.alphabet, repeat=n)]
    checks = system.premises + system.asserts
    for svals in itertools.product(strings, repeat=len(system.free)):
        for ivals in itertools.product(INT_RANGE, repeat=len(system.ints)):
            env = {id(s): v for s, v in zip(system.free, svals)}
            env.update({id(n): v & 0xFFFFFFFF for n, v in zip(system.ints, ivals)})
            memo: dict = {}
            for r, d in system.defs:
                env[id(r)] = E.evaluate(d, lambda x: env[id(x)], memo)
                memo[id(r)] = env[id(r)]
            if all(E.evaluate(c, lambda x: env[id(x)], memo) for c in checks):
                return {"strings": svals, "ints": ivals}
    return None


def holds(system: System, model: dict) -> bool:
    """Whether a solver model (names to values) satisfies the system."""
    env = {}
    for v in system.variables():
        val = model[v.val]
        env[id(v)] = val if v.sort == STRING else val & 0xFFFFFFFF
    for s in system.free:
        if len(env[id(s)]) > MAX_FREE_LEN or any(c not in system.alphabet for c in env[id(s)]):
            return False
    memo: dict = {}
    for r, d in system.defs:
        if E.evaluate(d, lambda x: env[id(x)], memo) != env[id(r)]:
            return False
    return all(E.evaluate(c, lambda x: env[id(x)], memo) for c in system.premises + system.asserts)


def random_system(rng: random.Random) -> System:
    alphabet = "abc"[:rng.choice((2, 3))]
    free = [E.sym(f"s{k}", STRING) for k in range(rng.choice((1, 1, 2)))]
    ints = [E.sym("n", INT)] if rng.random() < 0.4 else []
    strings = list(free)
    defs, premises = [], []

    def int_term():
        r = rng.random()
        if ints and r < 0.3:
            return ints[0]
        if r < 0.6:
            return E.strlen(rng.choice(strings))
        if r < 0.75:
            return E.sub(E.strlen(rng.choice(strings)), E.intc(1))
        return E.intc(rng.randint(-1, 4))

    def lit():
        return E.str_literal("".join(rng.choice(alphabet) for _ in range(rng.randint(0, 3))))

    def string_term():
        return rng.choice(strings) if rng.random() < 0.8 else lit()

    for k in range(rng.choice((0, 1, 1, 2))):
        op = rng.choice(("concat", "substring", "insert", "of_int", "copy"))
        r = E.sym(f"r{k}", STRING)
        if op == "concat":
            d = E.sapp("concat", string_term(), string_term())
        elif op == "substring":
            s = rng.choice(strings)
            b, e = int_term(), int_term()
            d = E.sapp("substring", s, b, e)
            premises.append(E.and_(E.sle(E.intc(0), b), E.sle(b, e), E.sle(e, E.strlen(s))))
        elif op == "insert":
            s, t, off = rng.choice(strings), string_term(), int_term()
            d = E.sapp("insert", s, t, off)
            premises.append(E.and_(E.sle(E.intc(0), off), E.sle(off, E.strlen(s))))
        elif op == "of_int":
            d = E.sapp("of_int", ints[0] if ints and rng.random() < 0.7 else E.intc(rng.randint(-12, 12)))
        else:
            d = rng.choice(strings)
        if d.sort != STRING or d is r:
            continue
        defs.append((r, d))
        strings.append(r)

    def atom():
        kind = rng.choice(("len", "char", "equals", "startswith", "indexof", "lit"))
        x = rng.choice(strings)
        if kind == "len":
            cmp = rng.choice((E.eq, E.slt, E.sle))
            return cmp(E.strlen(x), int_term())
        if kind == "char":
            k = rng.randint(0, 3)
            c = E.const(ord(rng.choice(alphabet + "0-")), E.CHAR)
            return E.and_(E.slt(E.intc(k), E.strlen(x)), E.eq(E.strchar(x, E.intc(k)), c))
        if kind == "equals":
            return E.sapp("equals", x, string_term())
        if kind == "startswith":
            return E.sapp("startswith", x, string_term())
        if kind == "indexof":
            c = E.intc(ord(rng.choice(alphabet)))
            return E.eq(E.sapp("indexof", x, c, int_term()), E.intc(rng.randint(-1, 3)))
        return E.sapp("equals", x, lit())

    def formula(depth=0):
        r = rng.random()
        if depth < 2 and r < 0.2:
            return E.or_(formula(depth + 1), formula(depth + 1))
        if r < 0.45:
            return E.not_(atom())
        return atom()

    asserts = [formula() for _ in range(rng.randint(1, 3))]
    return System(alphabet, free, ints, defs, asserts, premises)
