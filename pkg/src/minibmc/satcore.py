"""Embedded CDCL SAT solver.

Literals are DIMACS integers at the API boundary (``v`` / ``-v``).  Internally
a literal is encoded as ``2*v`` (positive) or ``2*v + 1`` (negative) so that
negation is ``lit ^ 1`` and per-literal tables are plain lists.

The solver supports monotone clause addition between calls to :meth:`solve`
and solving under assumptions (assumptions are the first decisions).
"""

from __future__ import annotations

import heapq
from typing import Iterable, Sequence

__all__ = ["Solver", "SolverError", "parse_dimacs", "write_dimacs", "luby"]


class SolverError(ValueError):
    pass


def luby(i: int) -> int:
    """Return the i-th element (1-based) of the Luby sequence 1,1,2,1,1,2,4,..."""
    if i < 1:
        raise ValueError("luby index is 1-based")
    k = 1
    while (1 << k) - 1 < i:
        k += 1
    while True:
        if i == (1 << k) - 1:
            return 1 << (k - 1)
        i -= (1 << (k - 1)) - 1
        k = 1
        while (1 << k) - 1 < i:
            k += 1


def _ilit(lit: int) -> int:
    return 2 * lit if lit > 0 else -2 * lit + 1


class Solver:
    """Conflict-driven clause learning solver.

    First-UIP learning, VSIDS-style decaying activities, Luby restarts and
    phase saving.  ``solve`` returns ``True`` (SAT) or ``False`` (UNSAT); after
    a SAT answer :attr:`model` holds a total assignment indexed by variable.
    """

    restart_unit = 100
    var_decay = 0.95

    def __init__(self, num_vars: int = 0):
        self.num_vars = 0
        self.ok = True
        self.val: list[int] = [0, 0]          # per internal literal: 1 true, -1 false, 0 unassigned
        self.level: list[int] = [0]
        self.reason: list[list[int] | None] = [None]
        self.activity: list[float] = [0.0]
        self.polarity: list[bool] = [False]  # saved phase, True = positive
        self.watches: list[list[list[int]]] = [[], []]
        self.clauses: list[list[int]] = []
        self.learnts: list[list[int]] = []
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.qhead = 0
        self.var_inc = 1.0
        self.heap: list[tuple[float, int]] = []
        self.model: list[bool] = [False]
        self.conflicts = 0
        self.decisions = 0
        self.propagations = 0
        self.max_learnts = 4000
        self.ensure_vars(num_vars)

    # ------------------------------------------------------------------ setup
    def new_var(self) -> int:
        self.num_vars += 1
        self.val.extend((0, 0))
        self.level.append(0)
        self.reason.append(None)
        self.activity.append(0.0)
        self.polarity.append(False)
        self.watches.extend(([], []))
        heapq.heappush(self.heap, (0.0, self.num_vars))
        return self.num_vars

    def ensure_vars(self, n: int) -> None:
        while self.num_vars < n:
            self.new_var()

    def prefer(self, lit: int) -> None:
        """Decision hint: branch on ``lit``'s variable early, with ``lit``'s sign.
        Affects which model is found, never the verdict."""
        v = abs(lit)
        if v == 0 or v > self.num_vars:
            raise SolverError(f"literal {lit} references an unallocated variable")
        self.polarity[v] = lit > 0
        self.activity[v] += self.var_inc
        heapq.heappush(self.heap, (-self.activity[v], v))

    def add_clause(self, lits: Iterable[int]) -> bool:
        """Add a clause permanently.  Returns False once the database is UNSAT."""
        if self.trail_lim:
            self._cancel_until(0)
        seen: set[int] = set()
        clause: list[int] = []
        for lit in lits:
            if lit == 0 or abs(lit) > self.num_vars:
                raise SolverError(f"literal {lit} references an unallocated variable")
            il = _ilit(lit)
            if il ^ 1 in seen:
                return self.ok          # tautology
            if il in seen:
                continue
            seen.add(il)
            v = self.val[il]
            if v == 1 and self.level[il >> 1] == 0:
                return self.ok          # satisfied at top level
            if v == -1 and self.level[il >> 1] == 0:
                continue
            clause.append(il)
        if not self.ok:
            return False
        if not clause:
            self.ok = False
            return False
        if len(clause) == 1:
            self._enqueue(clause[0], None)
            if self._propagate() is not None:
                self.ok = False
            return self.ok
        self.clauses.append(clause)
        self.watches[clause[0]].append(clause)
        self.watches[clause[1]].append(clause)
        return True

    # ------------------------------------------------------------- internals
    def _enqueue(self, lit: int, reason: list[int] | None) -> None:
        val = self.val
        val[lit] = 1
        val[lit ^ 1] = -1
        v = lit >> 1
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason
        self.trail.append(lit)

    def _propagate(self) -> list[int] | None:
        val = self.val
        watches = self.watches
        trail = self.trail
        level = self.level
        reason = self.reason
        dl = len(self.trail_lim)
        qhead = self.qhead
        while qhead < len(trail):
            false_lit = trail[qhead] ^ 1
            qhead += 1
            ws = watches[false_lit]
            n = len(ws)
            i = j = 0
            while i < n:
                c = ws[i]
                i += 1
                if c[0] == false_lit:
                    c[0] = c[1]
                    c[1] = false_lit
                first = c[0]
                if val[first] == 1:
                    ws[j] = c
                    j += 1
                    continue
                for k in range(2, len(c)):
                    lk = c[k]
                    if val[lk] != -1:
                        c[1] = lk
                        c[k] = false_lit
                        watches[lk].append(c)
                        break
                else:
                    ws[j] = c
                    j += 1
                    if val[first] == -1:
                        while i < n:
                            ws[j] = ws[i]
                            j += 1
                            i += 1
                        del ws[j:]
                        self.qhead = len(trail)
                        return c
                    val[first] = 1
                    val[first ^ 1] = -1
                    v = first >> 1
                    level[v] = dl
                    reason[v] = c
                    trail.append(first)
            del ws[j:]
        self.propagations += qhead - self.qhead
        self.qhead = qhead
        return None

    def _cancel_until(self, lvl: int) -> None:
        if len(self.trail_lim) <= lvl:
            return
        val = self.val
        polarity = self.polarity
        reason = self.reason
        activity = self.activity
        heap = self.heap
        start = self.trail_lim[lvl]
        for lit in self.trail[start:]:
            v = lit >> 1
            val[lit] = 0
            val[lit ^ 1] = 0
            polarity[v] = not (lit & 1)
            reason[v] = None
            heapq.heappush(heap, (-activity[v], v))
        del self.trail[start:]
        del self.trail_lim[lvl:]
        self.qhead = start

    def _bump(self, v: int) -> None:
        act = self.activity
        act[v] += self.var_inc
        if act[v] > 1e100:
            for u in range(1, self.num_vars + 1):
                act[u] *= 1e-100
            self.var_inc *= 1e-100
            self.heap = [(-act[u], u) for u in range(1, self.num_vars + 1) if self.val[2 * u] == 0]
            heapq.heapify(self.heap)
        elif self.val[2 * v] == 0:
            heapq.heappush(self.heap, (-act[v], v))

    def _analyze(self, confl: list[int]) -> tuple[list[int], int]:
        level = self.level
        reason = self.reason
        trail = self.trail
        dl = len(self.trail_lim)
        seen = set()
        learnt = [0]
        counter = 0
        p = -1
        idx = len(trail) - 1
        c = confl
        while True:
            for q in (c if p == -1 else c[1:]):
                v = q >> 1
                if v not in seen and level[v] > 0:
                    seen.add(v)
                    self._bump(v)
                    if level[v] >= dl:
                        counter += 1
                    else:
                        learnt.append(q)
            while (trail[idx] >> 1) not in seen:
                idx -= 1
            p = trail[idx]
            idx -= 1
            counter -= 1
            if counter == 0:
                break
            c = reason[p >> 1]
            # reason clauses keep the implied literal at position 0
            if c[0] != p:
                k = c.index(p)
                c[0], c[k] = c[k], c[0]
        learnt[0] = p ^ 1
        # local minimisation: drop literals implied by the rest of the clause
        if len(learnt) > 2:
            keep = [learnt[0]]
            for q in learnt[1:]:
                r = reason[q >> 1]
                if r is None or any((x >> 1) not in seen and level[x >> 1] > 0 for x in r[1:]):
                    keep.append(q)
            learnt = keep
        if len(learnt) == 1:
            bt = 0
        else:
            mi = 1
            for k in range(2, len(learnt)):
                if level[learnt[k] >> 1] > level[learnt[mi] >> 1]:
                    mi = k
            learnt[1], learnt[mi] = learnt[mi], learnt[1]
            bt = level[learnt[1] >> 1]
        return learnt, bt

    def _pick_branch(self) -> int:
        heap = self.heap
        val = self.val
        act = self.activity
        while heap:
            a, v = heapq.heappop(heap)
            if val[2 * v] == 0 and -a == act[v]:
                return 2 * v if self.polarity[v] else 2 * v + 1
        for v in range(1, self.num_vars + 1):
            if val[2 * v] == 0:
                return 2 * v if self.polarity[v] else 2 * v + 1
        return -1

    def _reduce_db(self) -> None:
        locked = set()
        for lit in self.trail:
            r = self.reason[lit >> 1]
            if r is not None:
                locked.add(id(r))
        self.learnts.sort(key=len)
        half = len(self.learnts) // 2
        keep, drop = [], set()
        for k, c in enumerate(self.learnts):
            if k >= half and len(c) > 2 and id(c) not in locked:
                drop.add(id(c))
            else:
                keep.append(c)
        self.learnts = keep
        for lit in range(2, 2 * self.num_vars + 2):
            ws = self.watches[lit]
            if ws:
                self.watches[lit] = [c for c in ws if id(c) not in drop]

    # ------------------------------------------------------------------- API
    def solve(self, assumptions: Sequence[int] = ()) -> bool:
        """Decide satisfiability of the clause database under ``assumptions``."""
        if not self.ok:
            return False
        for a in assumptions:
            if a == 0 or abs(a) > self.num_vars:
                raise SolverError(f"assumption {a} references an unallocated variable")
        assumps = [_ilit(a) for a in assumptions]
        self._cancel_until(0)
        if self._propagate() is not None:
            self.ok = False
            return False
        # rebuild the heap: stale entries may be missing after many restarts
        act = self.activity
        self.heap = [(-act[v], v) for v in range(1, self.num_vars + 1) if self.val[2 * v] == 0]
        heapq.heapify(self.heap)
        restart_no = 0
        while True:
            restart_no += 1
            budget = luby(restart_no) * self.restart_unit
            status = self._search(budget, assumps)
            if status is not None:
                self._cancel_until(0)
                return status

    def _search(self, budget: int, assumps: list[int]) -> bool | None:
        conflicts = 0
        val = self.val
        while True:
            confl = self._propagate()
            if confl is not None:
                self.conflicts += 1
                conflicts += 1
                if not self.trail_lim:
                    self.ok = False
                    return False
                learnt, bt = self._analyze(confl)
                self._cancel_until(bt)
                if len(learnt) == 1:
                    self._enqueue(learnt[0], None)
                else:
                    self.learnts.append(learnt)
                    self.watches[learnt[0]].append(learnt)
                    self.watches[learnt[1]].append(learnt)
                    self._enqueue(learnt[0], learnt)
                self.var_inc /= self.var_decay
                continue
            if conflicts >= budget:
                self._cancel_until(0)
                return None
            if len(self.learnts) - len(self.trail) >= self.max_learnts:
                self._reduce_db()
                self.max_learnts = int(self.max_learnts * 1.1)
            next_lit = -1
            while len(self.trail_lim) < len(assumps):
                p = assumps[len(self.trail_lim)]
                if val[p] == 1:
                    self.trail_lim.append(len(self.trail))
                elif val[p] == -1:
                    return False
                else:
                    next_lit = p
                    break
            if next_lit == -1:
                next_lit = self._pick_branch()
                if next_lit == -1:
                    self.model = [False] + [val[2 * v] == 1 for v in range(1, self.num_vars + 1)]
                    return True
                self.decisions += 1
            self.trail_lim.append(len(self.trail))
            self._enqueue(next_lit, None)

    def value(self, lit: int) -> bool:
        """Value of a DIMACS literal in the last model."""
        v = self.model[abs(lit)]
        return v if lit > 0 else not v

    def model_lits(self) -> list[int]:
        return [v if self.model[v] else -v for v in range(1, self.num_vars + 1)]


def parse_dimacs(text: str) -> tuple[int, list[list[int]]]:
    """Parse DIMACS CNF text into (num_vars, clauses)."""
    num_vars = 0
    clauses: list[list[int]] = []
    cur: list[int] = []
    header = False
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line[0] in "c%":
            continue
        if line[0] == "p":
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise SolverError(f"line {lineno}: malformed header {line!r}")
            num_vars = int(parts[2])
            header = True
            continue
        if not header:
            raise SolverError(f"line {lineno}: clause before 'p cnf' header")
        for tok in line.split():
            lit = int(tok)
            if lit == 0:
                clauses.append(cur)
                cur = []
            else:
                if abs(lit) > num_vars:
                    raise SolverError(f"line {lineno}: literal {lit} exceeds variable count")
                cur.append(lit)
    if cur:
        clauses.append(cur)
    return num_vars, clauses


def write_dimacs(num_vars: int, clauses: Sequence[Sequence[int]]) -> str:
    out = [f"p cnf {num_vars} {len(clauses)}"]
    out.extend(" ".join(map(str, c)) + " 0" for c in clauses)
    return "\n".join(out) + "\n"
