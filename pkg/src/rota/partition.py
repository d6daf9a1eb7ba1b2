"""Matroid partitioning into k independent sets, overcrowding and deadlocks.

The engine inserts elements one at a time along shortest paths in the
exchange digraph of the current parts I_1..I_k:

* x -> y  when y lies in some part I_i not holding x and I_i - y + x is
  independent (y is on the fundamental circuit of x in I_i);
* x is a sink when I_i + x is independent for some part I_i not holding x.

When an element cannot be inserted, everything reachable from it spans
each part's share, which makes the reachable set a certificate
|S| > k * rk(S).  After all insertions, the elements that cannot reach a
sink form the largest maximiser of |S| - k * rk(S), i.e. the k-deadlock.
"""

from __future__ import annotations

from collections import deque
from collections.abc import Iterable
from dataclasses import dataclass

from .config import audit_enabled
from .core import ColouredInstance, Matroid, SpanTester
from .errors import ContractError, RotaError


@dataclass(frozen=True)
class PartitionResult:
    parts: tuple[frozenset, ...]
    covered: frozenset
    certificate: frozenset | None = None

    @property
    def ok(self) -> bool:
        return self.certificate is None


@dataclass(frozen=True)
class DeadlockReport:
    k: int
    deadlock: frozenset
    rank_of_deadlock: int
    surplus: int

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "deadlock": sorted(self.deadlock),
            "rank": self.rank_of_deadlock,
            "surplus": self.surplus,
        }


class _Union:
    """k disjoint independent parts grown by augmenting paths."""

    def __init__(self, m: Matroid, k: int):
        if k <= 0:
            raise ContractError(f"k must be positive, got {k}")
        self.m = m
        self.k = k
        self.parts: list[list[int]] = [[] for _ in range(k)]
        self.where: dict[int, int] = {}
        self.testers: list[SpanTester] = [m.tester() for _ in range(k)]

    def _rebuild(self, i: int) -> None:
        self.testers[i] = self.m.tester_for(self.parts[i])

    def _out(self, x: int):
        """Yield ("sink", i) or ("edge", i, y) for the moves available to x."""
        own = self.where.get(x)
        for i in range(self.k):
            if i == own:
                continue
            circ = self.testers[i].circuit(x)
            if circ is None:
                yield ("sink", i)
                return
            for y in circ:
                yield ("edge", i, y)

    def insert(self, e: int) -> frozenset | None:
        """Insert e; on failure return the set reachable from e."""
        prev: dict[int, tuple[int, int] | None] = {e: None}
        queue = deque([e])
        while queue:
            x = queue.popleft()
            for move in self._out(x):
                if move[0] == "sink":
                    self._apply(x, move[1], prev)
                    return None
                _, i, y = move
                if y not in prev:
                    prev[y] = (x, i)
                    queue.append(y)
        return frozenset(prev)

    def _apply(self, x: int, i: int, prev) -> None:
        # walk back: x enters part i, its predecessor enters x's old part, ...
        touched = set()
        while True:
            old = self.where.get(x)
            if old is not None:
                self.parts[old].remove(x)
                touched.add(old)
            self.parts[i].append(x)
            self.where[x] = i
            touched.add(i)
            link = prev[x]
            if link is None:
                break
            x, i = link[0], old
        for j in touched:
            self._rebuild(j)

    def sink_reachers(self, elements: Iterable[int]) -> set[int]:
        """Elements (among ``elements``) with a path to a sink."""
        elements = list(elements)
        rev: dict[int, list[int]] = {x: [] for x in elements}
        good: set[int] = set()
        for x in elements:
            for move in self._out(x):
                if move[0] == "sink":
                    good.add(x)
                    break
                rev.setdefault(move[2], []).append(x)
        queue = deque(good)
        while queue:
            y = queue.popleft()
            for x in rev.get(y, ()):
                if x not in good:
                    good.add(x)
                    queue.append(x)
        return good


def _matroid(inst_or_m) -> Matroid:
    return inst_or_m.matroid if isinstance(inst_or_m, ColouredInstance) else inst_or_m


def _run(m: Matroid, U, k: int, stop_on_failure: bool):
    U = sorted(set(m._check(U)))
    eng = _Union(m, k)
    failures = []
    for e in U:
        cert = eng.insert(e)
        if cert is not None:
            failures.append((e, cert))
            if stop_on_failure:
                break
    return U, eng, failures


def union_rank(inst_or_m, U: Iterable[int], k: int) -> int:
    """Largest total size of k disjoint independent subsets of U."""
    _, eng, _ = _run(_matroid(inst_or_m), U, k, stop_on_failure=False)
    return len(eng.where)


def decompose(inst_or_m, U: Iterable[int], k: int) -> PartitionResult:
    """Split U into k independent sets, or return S with |S| > k * rk(S)."""
    m = _matroid(inst_or_m)
    U, eng, failures = _run(m, U, k, stop_on_failure=True)
    if failures:
        cert = failures[0][1]
        if len(cert) <= k * m.rank(cert):
            raise RotaError("partition certificate does not violate the rank bound")
        return PartitionResult(tuple(frozenset(p) for p in eng.parts), frozenset(eng.where), cert)
    parts = tuple(frozenset(p) for p in eng.parts)
    return PartitionResult(parts, frozenset(U))


def is_overcrowded(inst_or_m, S: Iterable[int], k: int) -> bool:
    """Every subset S' of S has |S - S'| >= k * (rk(S) - rk(S'))."""
    m = _matroid(inst_or_m)
    S = set(S)
    return union_rank(m, S, k) == k * m.rank(S)


def surplus(inst_or_m, S: Iterable[int], k: int) -> int:
    m = _matroid(inst_or_m)
    S = set(S)
    return len(S) - k * m.rank(S)


def deadlock(inst_or_m, U: Iterable[int], k: int) -> DeadlockReport:
    """The largest k-overcrowded subset of U."""
    m = _matroid(inst_or_m)
    U, eng, _ = _run(m, U, k, stop_on_failure=False)
    reach = eng.sink_reachers(U)
    D = frozenset(x for x in U if x not in reach)
    rk = m.rank(D)
    report = DeadlockReport(k, D, rk, len(D) - k * rk)
    if audit_enabled():
        slow = deadlock_by_contraction(m, U, k)
        if slow != D:
            raise RotaError("deadlock extraction disagrees with the contraction check")
    return report


# ---------------------------------------------------------------------------
# slow cross-check used in audit mode


class _ContractedTester(SpanTester):
    def __init__(self, matroid: "_Contraction"):
        super().__init__(matroid)
        self.inner = matroid.base.tester()
        self.inner.add(matroid.e)

    def add(self, x: int) -> bool:
        if self.inner.add(x):
            self.members.append(x)
            return True
        return False

    def in_span(self, x: int) -> bool:
        return self.inner.in_span(x)

    def checkpoint(self):
        return (len(self.members), self.inner.checkpoint())

    def rollback(self, token) -> None:
        k, inner = token
        del self.members[k:]
        self.inner.rollback(inner)


class _Contraction(Matroid):
    """M / e for a non-loop e, restricted to ground - e."""

    kind = "contraction"

    def __init__(self, base: Matroid, e: int):
        super().__init__(base.ground - {e})
        self.base = base
        self.e = e

    def tester(self) -> SpanTester:
        return _ContractedTester(self)


def deadlock_by_contraction(m: Matroid, U: Iterable[int], k: int) -> frozenset:
    """e is in the deadlock iff some surplus maximiser contains e."""
    U = set(U)
    best = len(U) - union_rank(m, U, k)
    out = set()
    for e in sorted(U):
        if m.rank([e]) == 0:
            out.add(e)
            continue
        rest = U - {e}
        val = 1 - k + len(rest) - union_rank(_Contraction(m, e), rest, k)
        if val == best:
            out.add(e)
    return frozenset(out)
