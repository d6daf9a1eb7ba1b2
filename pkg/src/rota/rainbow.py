"""Families of disjoint rainbow independent sets and the moves between them.

A :class:`RainbowFamily` is an immutable, ordered tuple of member sets tied
to its instance.  Every operation returns a new family; the old one stays
valid, which keeps audit trails and rollbacks trivial.
"""

from __future__ import annotations

import math
from collections import deque
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from fractions import Fraction

from ._matching import max_matching
from .config import audit_enabled
from .core import ColouredInstance
from .errors import ContractError, RotaError
from .exchange import rainbow_augment


class NotApplicable(RotaError):
    """The switching precondition fails for this element."""


class FamilyError(RotaError):
    """A family stopped being disjoint, rainbow or independent."""


@dataclass(frozen=True)
class RainbowFamily:
    inst: ColouredInstance
    members: tuple[frozenset, ...]

    @classmethod
    def empty(cls, inst: ColouredInstance, size: int) -> "RainbowFamily":
        return cls(inst, tuple(frozenset() for _ in range(size)))

    @classmethod
    def of(cls, inst: ColouredInstance, members: Iterable[Iterable[int]]) -> "RainbowFamily":
        fam = cls(inst, tuple(frozenset(T) for T in members))
        fam.validate()
        return fam

    def __len__(self) -> int:
        return len(self.members)

    def __getitem__(self, j: int) -> frozenset:
        return self.members[j]

    @property
    def covered(self) -> frozenset:
        return frozenset().union(*self.members)

    @property
    def uncovered(self) -> frozenset:
        return self.inst.ground - self.covered

    def size(self) -> int:
        return sum(len(T) for T in self.members)

    def replace(self, updates: dict[int, Iterable[int]]) -> "RainbowFamily":
        ms = list(self.members)
        for j, S in updates.items():
            ms[j] = frozenset(S)
        return RainbowFamily(self.inst, tuple(ms))

    def host(self) -> dict[int, int]:
        return {x: j for j, T in enumerate(self.members) for x in T}

    def validate(self) -> None:
        seen: set[int] = set()
        for j, T in enumerate(self.members):
            if seen & T:
                raise FamilyError(f"member {j} overlaps earlier members on {sorted(seen & T)}")
            seen |= T
            if not T <= self.inst.ground:
                raise FamilyError(f"member {j} has unknown elements")
            if not self.inst.is_rainbow_independent(T):
                raise FamilyError(f"member {j} is not rainbow independent")

    def to_json(self) -> list[list[int]]:
        return [sorted(T) for T in self.members]


def fits(inst: ColouredInstance, T: Iterable[int], x: int) -> bool:
    """Is T + x rainbow independent (x outside T)?"""
    T = set(T)
    if x in T or inst.colour[x] in inst.colours(T):
        return False
    return inst.matroid.is_independent(T | {x})


def _check(fam: RainbowFamily) -> None:
    if audit_enabled():
        fam.validate()


# ---------------------------------------------------------------------------
# maximum rainbow independent sets (intersection with the colour partition)


def max_rainbow_independent(inst: ColouredInstance, subset: Iterable[int]) -> frozenset:
    """Largest rainbow independent subset, by matroid-intersection augmentation."""
    pool = sorted(set(subset))
    m = inst.matroid
    col = inst.colour
    I: list[int] = []
    used: set[int] = set()
    t = m.tester()
    for x in pool:
        if col[x] not in used and t.add(x):
            I.append(x)
            used.add(col[x])
    while True:
        path = _intersection_path(inst, pool, I)
        if path is None:
            return frozenset(I)
        Iset = set(I)
        for z in path:
            if z in Iset:
                Iset.remove(z)
            else:
                Iset.add(z)
        I = sorted(Iset)


def _intersection_path(inst: ColouredInstance, pool: list[int], I: list[int]) -> list[int] | None:
    m = inst.matroid
    col = inst.colour
    Iset = set(I)
    outside = [x for x in pool if x not in Iset]
    if not outside:
        return None
    t = m.tester_for(I)
    circuits = {x: t.circuit(x) for x in outside}
    used = {col[y]: y for y in I}
    sources = [x for x in outside if circuits[x] is None]
    targets = {x for x in outside if col[x] not in used}
    # arcs: x -> y (y in I) when I - y + x stays rainbow, i.e. same colour;
    #       y -> x when I - y + x stays independent, i.e. y on x's circuit
    to_outside: dict[int, list[int]] = {y: [] for y in I}
    for x in outside:
        if circuits[x]:
            for y in circuits[x]:
                to_outside[y].append(x)
    prev: dict[int, int | None] = {x: None for x in sources}
    queue = deque(sources)
    while queue:
        z = queue.popleft()
        if z not in Iset:
            if z in targets:
                path = []
                while z is not None:
                    path.append(z)
                    z = prev[z]
                return path[::-1]
            y = used.get(col[z])
            if y is not None and y not in prev:
                prev[y] = z
                queue.append(y)
        else:
            for x in to_outside[z]:
                if x not in prev:
                    prev[x] = z
                    queue.append(x)
    return None


# ---------------------------------------------------------------------------
# colour availability and good edges


@dataclass(frozen=True)
class BipartiteGraph:
    left: tuple
    right: tuple
    edges: frozenset

    def degrees(self) -> tuple[dict, dict]:
        dl = {x: 0 for x in self.left}
        dr = {y: 0 for y in self.right}
        for x, y in self.edges:
            dl[x] += 1
            dr[y] += 1
        return dl, dr


@dataclass(frozen=True)
class AvailabilityGraph(BipartiteGraph):
    deg_left: dict = field(default_factory=dict)
    deg_right: dict = field(default_factory=dict)


def availability_graph(family: RainbowFamily) -> AvailabilityGraph:
    """Edges (j, c) for every colour c missing from member j."""
    inst = family.inst
    colours = range(1, inst.n + 1)
    edges = set()
    for j, T in enumerate(family.members):
        present = inst.colours(T)
        edges.update((j, c) for c in colours if c not in present)
    left = tuple(range(len(family)))
    g = BipartiteGraph(left, tuple(colours), frozenset(edges))
    dl, dr = g.degrees()
    return AvailabilityGraph(left, tuple(colours), frozenset(edges), dl, dr)


@dataclass(frozen=True)
class GoodEdgeParams:
    alpha: Fraction | float
    beta: Fraction | float
    delta: Fraction | float
    mu: Fraction | float | None = None
    sigma: Fraction | float | None = None
    lam: Fraction | float | None = None
    rho: Fraction | float | None = None

    def __post_init__(self):
        if not 0 < self.alpha < self.beta:
            raise ContractError("need 0 < alpha < beta")
        if not self.delta > 0:
            raise ContractError("need delta > 0")


def good_edge_bound(params: GoodEdgeParams, nx: int, ny: int) -> int:
    a, b, d = (Fraction(v) for v in (params.alpha, params.beta, params.delta))
    return math.ceil(d * (b - a) / b * nx * ny)


def good_edges(G: BipartiteGraph, params: GoodEdgeParams) -> frozenset:
    """Edges (x, y) with deg(y) <= beta * deg(x); checks the count guarantee."""
    a, b, d = (Fraction(v) for v in (params.alpha, params.beta, params.delta))
    nx, ny = len(G.left), len(G.right)
    if nx > a * ny:
        raise ContractError(f"|X|={nx} exceeds alpha*|Y|={float(a * ny)}")
    dl, dr = G.degrees()
    for y in G.right:
        if dr[y] < d * nx:
            raise ContractError(f"vertex {y!r} has degree {dr[y]} < delta*|X|")
    out = frozenset((x, y) for x, y in G.edges if dr[y] <= b * dl[x])
    if len(out) < good_edge_bound(params, nx, ny):
        raise RotaError("good-edge count fell below its guaranteed bound")
    return out


# ---------------------------------------------------------------------------
# reductions and switching


def host_counts(family: RainbowFamily, xs: Iterable[int] | None = None) -> dict[int, list[int]]:
    """For each x: the member indices j with T_j + x rainbow independent."""
    inst = family.inst
    xs = sorted(family.covered if xs is None else set(xs))
    hosts: dict[int, list[int]] = {x: [] for x in xs}
    for j, T in enumerate(family.members):
        present = inst.colours(T)
        cand = [x for x in xs if x not in T and inst.colour[x] not in present]
        if not cand:
            continue
        t = inst.matroid.tester_for(T)
        for x, spanned in zip(cand, t.in_span_many(cand)):
            if not spanned:
                hosts[x].append(j)
    return hosts


def ell_reduction(family: RainbowFamily, ell: int) -> tuple[RainbowFamily, frozenset]:
    """Drop every covered element that has at least ``ell`` possible hosts."""
    if ell <= 0:
        raise ContractError("ell must be positive")
    if ell > len(family):
        return family, frozenset()
    hosts = host_counts(family)
    removed = frozenset(x for x, js in hosts.items() if len(js) >= ell)
    out = RainbowFamily(family.inst, tuple(T - removed for T in family.members))
    return out, removed


def reductions(family: RainbowFamily, ell: int, r: int) -> list[RainbowFamily]:
    levels = [family]
    for _ in range(r):
        nxt, removed = ell_reduction(levels[-1], ell)
        levels.append(nxt)
        if not removed:
            # further reductions are identical
            levels.extend([nxt] * (r + 1 - len(levels)))
            break
    return levels


@dataclass(frozen=True)
class SwitchChain:
    steps: tuple  # (member index, removed elements, added elements)
    total_churn: int

    @classmethod
    def between(cls, before: RainbowFamily, after: RainbowFamily) -> "SwitchChain":
        steps = []
        for j, (T, S) in enumerate(zip(before.members, after.members)):
            if T != S:
                steps.append((j, frozenset(T - S), frozenset(S - T)))
        return cls(tuple(steps), sum(len(a) for _, _, a in steps))

    def replay(self, family: RainbowFamily) -> RainbowFamily:
        ms = list(family.members)
        for j, rem, add in self.steps:
            ms[j] = (ms[j] - rem) | add
        return RainbowFamily(family.inst, tuple(ms))

    def to_json(self) -> dict:
        return {
            "steps": [{"member": j, "removed": sorted(r), "added": sorted(a)} for j, r, a in self.steps],
            "total_churn": self.total_churn,
        }


def first_host_level(levels: Sequence[RainbowFamily], e: int) -> tuple[int, int] | None:
    """Smallest (level, member) with member + e rainbow independent."""
    inst = levels[0].inst
    seen = set()
    for i, fam in enumerate(levels):
        if id(fam) in seen:
            continue
        seen.add(id(fam))
        for j, T in enumerate(fam.members):
            if fits(inst, T, e):
                return i, j
    return None


def switch_in_element(family: RainbowFamily, e: int, ell: int, r: int) -> tuple[RainbowFamily, SwitchChain]:
    """Absorb uncovered e, changing at most 3^r elements across the family.

    Raises NotApplicable when no reduction level offers a host for e.
    """
    if ell <= 3**r:
        raise ContractError(f"need ell > 3^r, got ell={ell}, r={r}")
    if e in family.covered:
        raise ContractError(f"element {e} is already covered")
    if e not in family.inst.ground:
        raise ContractError(f"unknown element {e}")
    levels = reductions(family, ell, r)
    found = first_host_level(levels, e)
    if found is None:
        raise NotApplicable(f"no host for {e} at reduction levels 0..{r}")
    i, _ = found
    out = _switch(levels[: i + 1], e)
    chain = SwitchChain.between(family, out)
    if chain.total_churn > 3**i:
        raise RotaError("switching exceeded its churn bound")
    if out.covered != family.covered | {e}:
        raise RotaError("switching changed the covered set unexpectedly")
    _check(out)
    return out, chain


def _switch(levels: Sequence[RainbowFamily], e: int) -> RainbowFamily:
    # levels[-1] hosts e directly; levels[k+1] is the reduction of levels[k]
    inst = levels[0].inst
    top = levels[0]
    if len(levels) == 1:
        for j, T in enumerate(top.members):
            if fits(inst, T, e):
                return top.replace({j: T | {e}})
        raise NotApplicable("host vanished")
    Sp = _switch(levels[1:], e)
    Tp = levels[1]
    star = []
    for T, T1, S1 in zip(top.members, Tp.members, Sp.members):
        star.append(rainbow_augment(inst, S1, (S1 & T1) | (T - T1)))
    X = sorted(top.covered - frozenset().union(*star))
    star_fam = RainbowFamily(inst, tuple(star))
    return _distribute(star_fam, X)


def _distribute(fam: RainbowFamily, X: list[int]) -> RainbowFamily:
    """Give each displaced x its own member that can take it."""
    inst = fam.inst
    if not X:
        return fam
    options = {x: [j for j, S in enumerate(fam.members) if fits(inst, S, x)] for x in X}
    taken: dict[int, int] = {}
    for x in X:
        j = next((j for j in options[x] if j not in taken.values()), None)
        if j is None:
            break
        taken[x] = j
    if len(taken) < len(X):
        taken = max_matching(options, X)
        if len(taken) < len(X):
            raise RotaError("displaced elements cannot be redistributed")
    return fam.replace({j: fam.members[j] | {x} for x, j in taken.items()})


# ---------------------------------------------------------------------------
# extension to inclusion-maximal families


def _direct_pass(family: RainbowFamily, pool: Sequence[int]) -> RainbowFamily:
    inst = family.inst
    members = [set(T) for T in family.members]
    colours = [inst.colours(T) for T in members]
    testers = [inst.matroid.tester_for(T) for T in members]
    covered = set(family.covered)
    for e in pool:
        if e in covered:
            continue
        c = inst.colour[e]
        for j in range(len(members)):
            if c not in colours[j] and testers[j].add(e):
                members[j].add(e)
                colours[j].add(c)
                covered.add(e)
                break
    return RainbowFamily(inst, tuple(frozenset(T) for T in members))


def addable(family: RainbowFamily, ell: int, r: int, pool: Iterable[int] | None = None) -> list[int]:
    """Uncovered elements of ``pool`` with a host at some reduction level."""
    levels = reductions(family, ell, r)
    cands = sorted(family.uncovered if pool is None else set(pool) - family.covered)
    return [e for e in cands if first_host_level(levels, e) is not None]


def inclusion_maximal_extend(
    family: RainbowFamily, ell: int, r: int, pool: Iterable[int] | None = None
) -> RainbowFamily:
    """Grow the family until no element of ``pool`` can be switched in."""
    if ell <= 3**r:
        raise ContractError(f"need ell > 3^r, got ell={ell}, r={r}")
    # an explicit pool keeps its order, so callers can randomise scans
    pool = sorted(family.inst.ground) if pool is None else list(dict.fromkeys(pool))
    fam = _direct_pass(family, pool)
    while True:
        levels = reductions(fam, ell, r)
        grew = False
        for e in pool:
            if e in fam.covered:
                continue
            if first_host_level(levels, e) is None:
                continue
            fam, _ = switch_in_element(fam, e, ell, r)
            fam = _direct_pass(fam, pool)
            grew = True
            break
        if not grew:
            _check(fam)
            return fam


# ---------------------------------------------------------------------------
# diagnostics


def classify_family(
    family: RainbowFamily,
    mu: float,
    ell: int,
    mode: str = "cover",
    lam: float | None = None,
    epsilon: float | None = None,
    R: Iterable[int] = (),
    gamma: float | None = None,
    r_budget: int = 1,
) -> set[str]:
    """Which of the small-member / many-additions / lossy-reduction outcomes hold."""
    inst = family.inst
    n = inst.n
    if gamma is None:
        gamma = 1.0 / (4 * max(r_budget, 1))
    out: set[str] = set()
    if any(len(T) <= mu * n for T in family.members):
        out.add("i")
    G = availability_graph(family)
    covered = family.covered
    R = frozenset(R)
    for j, T in enumerate(family.members):
        if "ii" in out:
            break
        present = inst.colours(T)
        for c in range(1, n + 1):
            if c in present:
                continue
            if mode == "cover":
                if lam is None:
                    raise ContractError("cover mode needs lam")
                pool = inst.B(c) - covered
                threshold = G.deg_right[c] - math.floor(lam * n)
            else:
                if epsilon is None:
                    raise ContractError("pack mode needs epsilon")
                pool = inst.B(c) - covered - R
                threshold = G.deg_right[c] - len(inst.B(c) & R) + math.ceil(epsilon * n)
            count = sum(1 for e in pool if fits(inst, T, e))
            if count > threshold:
                out.add("ii")
                break
    reduced, _ = ell_reduction(family, ell)
    if len(family.covered) - len(reduced.covered) >= gamma * n * n:
        out.add("iii")
    if not out:
        out.add("none")
    return out
