"""Small CNF families, a brute-force reference and the frozen corpus under data/cnf."""

import itertools
import random
from pathlib import Path

from minibmc.satcore import write_dimacs

CORPUS = Path(__file__).resolve().parent / "data" / "cnf"


def brute_force(n: int, clauses, assumptions=()) -> bool:
    """Satisfiability by bit-parallel enumeration: bit a of a mask is assignment a."""
    full = (1 << (1 << n)) - 1
    var_mask = []
    for v in range(n):
        half = 1 << v
        block = ((1 << half) - 1) << half          # 2^v zeros then 2^v ones
        var_mask.append(block * (full // ((1 << 2 * half) - 1)))

    def lit_mask(lit):
        m = var_mask[abs(lit) - 1]
        return m if lit > 0 else full ^ m

    alive = full
    for c in list(clauses) + [[a] for a in assumptions]:
        cm = 0
        for lit in c:
            cm |= lit_mask(lit)
        alive &= cm
        if not alive:
            return False
    return True


def random_cnf(rng: random.Random, n: int):
    m = max(1, round(n * rng.uniform(3.5, 5.0)))
    return [[rng.choice((1, -1)) * rng.randint(1, n) for _ in range(rng.randint(1, 3))]
            for _ in range(m)]


def pigeonhole(p: int, h: int):
    var = lambda i, j: i * h + j + 1
    cls = [[var(i, j) for j in range(h)] for i in range(p)]
    for j in range(h):
        for a, b in itertools.combinations(range(p), 2):
            cls.append([-var(a, j), -var(b, j)])
    return p * h, cls


def parity(n: int, odd: bool):
    """x1 xor ... xor xn = odd, chained through auxiliaries."""
    cls, acc, top = [], 1, n
    for v in range(2, n + 1):
        top += 1
        a, b, o = acc, v, top
        cls += [[-o, a, b], [-o, -a, -b], [o, -a, b], [o, a, -b]]
        acc = o
    cls.append([acc] if odd else [-acc])
    return top, cls


def write_corpus(directory: Path = CORPUS) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    rng = random.Random(2024)
    items = []
    for k in range(48):
        n = 3 + k % 13
        items.append((f"random-{k:02d}", n, random_cnf(rng, n)))
    for p, h in ((2, 1), (3, 2), (3, 3), (4, 3), (3, 4)):
        items.append((f"php-{p}-{h}", *pigeonhole(p, h)))
    for n in (3, 5, 7):
        for odd in (False, True):
            items.append((f"parity-{n}-{int(odd)}", *parity(n, odd)))
    # contradictory parities over the same inputs
    n1, c1 = parity(4, True)
    n2, c2 = parity(4, False)
    shift = lambda c: [[l if abs(l) <= 4 else (abs(l) + n1 - 4) * (1 if l > 0 else -1) for l in cl]
                       for cl in c]
    items.append(("parity-clash", n1 + n2 - 4, c1 + shift(c2)))
    for name, n, cls in items:
        (directory / f"{name}.cnf").write_text(write_dimacs(n, cls))
