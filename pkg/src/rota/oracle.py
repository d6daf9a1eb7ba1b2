"""Brute-force reference answers for small inputs.

These enumerate rather than search cleverly; they exist to arbitrate the
fast solvers, so each refuses inputs above its caps unless forced.
"""

from __future__ import annotations

import time
import warnings
from collections.abc import Iterable
from dataclasses import dataclass

from .core import ColouredInstance, Matroid
from .errors import SizeCapError


@dataclass(frozen=True)
class BruteForceBudget:
    max_ground: int = 14
    max_n: int = 4
    time_cap_ms: float | None = None
    force: bool = False


DEFAULT_BUDGET = BruteForceBudget()


class _Clock:
    def __init__(self, budget: BruteForceBudget):
        self.deadline = None
        if budget.time_cap_ms is not None:
            self.deadline = time.monotonic() + budget.time_cap_ms / 1000.0

    def tick(self) -> None:
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise SizeCapError("brute-force time cap exceeded")


def _cap(value: int, limit: int, what: str, budget: BruteForceBudget) -> None:
    if value > limit:
        if budget.force:
            warnings.warn(f"{what}={value} exceeds cap {limit}; forced", RuntimeWarning, stacklevel=3)
        else:
            raise SizeCapError(f"{what}={value} exceeds the brute-force cap {limit}")


def _matroid(inst_or_m) -> Matroid:
    return inst_or_m.matroid if isinstance(inst_or_m, ColouredInstance) else inst_or_m


def subset_ranks(m: Matroid, elems: list[int]) -> list[int]:
    """rk of every subset of ``elems``, indexed by bitmask."""
    size = 1 << len(elems)
    rk = [0] * size
    indep = [True] * size
    for mask in range(1, size):
        low = mask & -mask
        rest = mask ^ low
        bits = mask.bit_count()
        if indep[rest] and m.is_independent([elems[i] for i in range(len(elems)) if mask >> i & 1]):
            rk[mask] = bits
        else:
            indep[mask] = False
            best = 0
            sub = mask
            while sub:
                b = sub & -sub
                sub ^= b
                r = rk[mask ^ b]
                if r > best:
                    best = r
            rk[mask] = best
    return rk


def overcrowded_masks(m: Matroid, elems: list[int], k: int) -> list[bool]:
    """For each subset S: does |S - S'| >= k (rk S - rk S') hold for all S' <= S."""
    rk = subset_ranks(m, elems)
    size = len(rk)
    f = [mask.bit_count() - k * rk[mask] for mask in range(size)]
    g = f[:]  # g[S] = max of f over subsets of S
    for mask in range(1, size):
        sub = mask
        while sub:
            b = sub & -sub
            sub ^= b
            if g[mask ^ b] > g[mask]:
                g[mask] = g[mask ^ b]
    return [f[mask] >= g[mask] for mask in range(size)]


def bf_deadlock(inst_or_m, U: Iterable[int], k: int, budget: BruteForceBudget = DEFAULT_BUDGET) -> frozenset:
    """Union of all k-overcrowded subsets of U, by full enumeration."""
    m = _matroid(inst_or_m)
    elems = sorted(set(U))
    _cap(len(elems), budget.max_ground, "|U|", budget)
    ok = overcrowded_masks(m, elems, k)
    acc = 0
    for mask, good in enumerate(ok):
        if good:
            acc |= mask
    return frozenset(elems[i] for i in range(len(elems)) if acc >> i & 1)


def bf_is_overcrowded(inst_or_m, S: Iterable[int], k: int) -> bool:
    m = _matroid(inst_or_m)
    elems = sorted(set(S))
    rk = subset_ranks(m, elems)
    full = (1 << len(elems)) - 1
    return all(
        (full ^ sub).bit_count() >= k * (rk[full] - rk[sub]) for sub in range(full + 1)
    )


def bf_has_violating_subset(inst_or_m, U: Iterable[int], k: int) -> frozenset | None:
    """Some S <= U with |S| > k * rk(S), smallest first; None if there is none."""
    m = _matroid(inst_or_m)
    elems = sorted(set(U))
    rk = subset_ranks(m, elems)
    order = sorted(range(len(rk)), key=lambda s: (s.bit_count(), s))
    for mask in order:
        if mask.bit_count() > k * rk[mask]:
            return frozenset(elems[i] for i in range(len(elems)) if mask >> i & 1)
    return None


def transversal_bases(inst: ColouredInstance, clock: _Clock | None = None) -> list[frozenset]:
    """All rainbow bases, one element per colour, by pruned product search."""
    m = inst.matroid
    classes = [sorted(inst.B(c)) for c in range(1, inst.n + 1)]
    out: list[frozenset] = []
    t = m.tester()

    def rec(c: int) -> None:
        if clock is not None:
            clock.tick()
        if c == inst.n:
            out.append(frozenset(t.members))
            return
        for x in classes[c]:
            tok = t.checkpoint()
            if t.add(x):
                rec(c + 1)
                t.rollback(tok)

    rec(0)
    return out


def bf_max_disjoint_transversal_bases(
    inst: ColouredInstance, budget: BruteForceBudget = DEFAULT_BUDGET
) -> tuple[int, list[frozenset]]:
    """Exact maximum number of pairwise disjoint transversal bases."""
    _cap(inst.n, budget.max_n, "n", budget)
    clock = _Clock(budget)
    bases = transversal_bases(inst, clock)
    first = sorted(inst.B(1))
    by_first: dict[int, list[frozenset]] = {x: [] for x in first}
    for B in bases:
        by_first[min(B & inst.B(1))].append(B)
    best: list[frozenset] = []
    chosen: list[frozenset] = []

    def rec(i: int, used: frozenset) -> bool:
        nonlocal best
        clock.tick()
        if len(chosen) > len(best):
            best = list(chosen)
            if len(best) == inst.n:
                return True
        if len(chosen) + (len(first) - i) <= len(best):
            return False
        for j in range(i, len(first)):
            for B in by_first[first[j]]:
                if not (B & used):
                    chosen.append(B)
                    if rec(j + 1, used | B):
                        return True
                    chosen.pop()
        return False

    rec(0, frozenset())
    return len(best), best


def bf_min_cover(inst: ColouredInstance, budget: BruteForceBudget = DEFAULT_BUDGET) -> tuple[int, list[frozenset]]:
    """Exact minimum number of transversal bases whose union is the ground set."""
    _cap(inst.n, budget.max_n, "n", budget)
    clock = _Clock(budget)
    bases = transversal_bases(inst, clock)
    containing: dict[int, list[frozenset]] = {x: [] for x in inst.ground}
    for B in bases:
        for x in B:
            containing[x].append(B)
    ground = frozenset(inst.ground)
    n = inst.n
    chosen: list[frozenset] = []

    def rec(uncovered: frozenset, depth: int) -> bool:
        clock.tick()
        if not uncovered:
            return True
        if depth == 0 or len(uncovered) > depth * n:
            return False
        x = min(uncovered)
        for B in containing[x]:
            chosen.append(B)
            if rec(uncovered - B, depth - 1):
                return True
            chosen.pop()
        return False

    depth = n
    while not rec(ground, depth):
        depth += 1
        if depth > len(ground):  # unreachable for valid instances
            raise SizeCapError("no cover found")
    return depth, list(chosen)


def bf_rainbow_decomposition(
    inst: ColouredInstance, U: Iterable[int], parts: int, budget: BruteForceBudget = DEFAULT_BUDGET
) -> list[frozenset] | None:
    """Partition of U into ``parts`` rainbow independent sets, or None."""
    elems = sorted(set(U))
    _cap(len(elems), budget.max_ground, "|U|", budget)
    clock = _Clock(budget)
    if not elems:
        return [frozenset() for _ in range(parts)]
    if parts <= 0:
        return None
    m = inst.matroid
    # most frequent colours first: clashes surface early
    freq: dict[int, int] = {}
    for x in elems:
        freq[inst.colour[x]] = freq.get(inst.colour[x], 0) + 1
    if max(freq.values()) > parts:
        return None
    elems.sort(key=lambda x: (-freq[inst.colour[x]], inst.colour[x], x))
    testers = [m.tester() for _ in range(parts)]
    colours: list[set[int]] = [set() for _ in range(parts)]

    def rec(i: int) -> bool:
        clock.tick()
        if i == len(elems):
            return True
        x = elems[i]
        c = inst.colour[x]
        tried_empty = False
        for j in range(parts):
            if c in colours[j]:
                continue
            if not testers[j].members:
                if tried_empty:
                    continue
                tried_empty = True
            tok = testers[j].checkpoint()
            if testers[j].add(x):
                colours[j].add(c)
                if rec(i + 1):
                    return True
                colours[j].discard(c)
                testers[j].rollback(tok)
        return False

    if rec(0):
        return [frozenset(t.members) for t in testers]
    return None


def bf_max_rainbow_independent(inst: ColouredInstance, S: Iterable[int]) -> int:
    """Size of the largest rainbow independent subset of S."""
    elems = sorted(set(S))
    m = inst.matroid
    best = 0
    t = m.tester()

    def rec(i: int, used: set) -> None:
        nonlocal best
        if len(t.members) + (len(elems) - i) <= best:
            return
        if i == len(elems):
            best = max(best, len(t.members))
            return
        x = elems[i]
        c = inst.colour[x]
        if c not in used:
            tok = t.checkpoint()
            if t.add(x):
                used.add(c)
                rec(i + 1, used)
                used.discard(c)
                t.rollback(tok)
        rec(i + 1, used)

    rec(0, set())
    return best
