"""Covering the ground set with few transversal bases.

Pipeline: a family of floor((1+lambda) n) disjoint rainbow independent
sets is driven towards an uncovered set U with empty k-deadlock
(k = floor(lambda n)), colours are balanced inside U, U is split into
rainbow independent sets, and everything is extended greedily to
transversal bases.  A pruning pass then tries to drop whole bases by
single swaps, since a cover may reuse elements.
"""

from __future__ import annotations

import math
import random
import warnings
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

from .config import audit_enabled
from .core import ColouredInstance
from .errors import ContractError, RotaError
from .exchange import inject_between, rainbow_augment
from .oracle import BruteForceBudget, bf_min_cover, bf_rainbow_decomposition
from .partition import decompose, deadlock
from .rainbow import RainbowFamily, inclusion_maximal_extend, max_rainbow_independent


@dataclass
class CoverConfig:
    epsilon: float = 0.3
    lam: float | None = None
    nu: float | None = None
    iteration_budget: int = 2000
    ell: int | None = None
    r: int = 1
    exact_max_n: int = 3
    exact_leftover_max: int = 10
    retries: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.lam is None:
            self.lam = self.epsilon / 3
        if self.nu is None:
            self.nu = self.lam**2 / 4
        if self.ell is None:
            self.ell = 3**self.r + 1
        if not 0 < self.lam < self.epsilon < 1:
            raise ContractError("need 0 < lambda < epsilon < 1")
        if self.iteration_budget <= 0 or self.r < 0 or self.ell <= 3**self.r:
            raise ContractError("budgets must be positive and ell > 3^r")


@dataclass
class CoverSolution:
    bases: list[frozenset]
    covers: bool
    count: int
    status: str = "ok"
    audit: dict = field(default_factory=dict)


@dataclass
class NoDeadlockResult:
    family: RainbowFamily
    k: int
    success: bool
    residual_deadlock: frozenset
    ladder: tuple[int, ...]
    tuples: list[tuple[int, ...]]
    steps: int
    notes: list[str]


def family_size(n: int, lam: float) -> int:
    return math.floor((1 + lam) * n)


def deadlock_parameter(n: int, lam: float) -> tuple[int, bool]:
    """floor(lambda n), or 1 when that is 0 (second value flags the substitution)."""
    k = math.floor(lam * n)
    return (k, False) if k >= 1 else (1, True)


def ladder(n: int, lam: float) -> tuple[int, ...]:
    """Deadlock orders tracked by the descent potential, largest first."""
    k, _ = deadlock_parameter(n, lam)
    top = lam * n
    z = int(math.floor(top / 4) * 4)
    if z >= 8:
        return tuple(range(z, z // 2 - 1, -2))
    return tuple(j for j in (k, k - 2) if j >= 1)


def _deadlock_or_all(inst, U, j: int) -> frozenset:
    # every set is 0-overcrowded, so D_0(U) = U
    if j <= 0:
        return frozenset(U)
    return deadlock(inst, U, j).deadlock


def potential(inst: ColouredInstance, U: Iterable[int], orders: Sequence[int]) -> tuple[int, ...]:
    U = frozenset(U)
    return tuple(len(_deadlock_or_all(inst, U, j)) for j in orders) + (len(U),)


def _descent_move(inst, fam: RainbowFamily, orders, current, broad: bool):
    """First (e, T) move that lowers the potential; None if there is none."""
    U = fam.uncovered
    m = inst.matroid
    for j in orders:
        Dj = _deadlock_or_all(inst, U, j)
        if not Dj:
            continue
        W = m.tester_for(sorted(Dj)).members
        if broad:
            S = frozenset()
        elif j - 2 >= 0:
            S = m.closure(_deadlock_or_all(inst, U, j - 2))
        else:
            S = frozenset()
        for e in W:
            for idx, T in enumerate(fam.members):
                base = (T & S) | {e}
                if not inst.is_rainbow_independent(base):
                    continue
                Tstar = rainbow_augment(inst, base, T)
                F = T - Tstar
                if len(F) > 2:
                    raise RotaError("descent move removed more than two elements")
                cand = fam.replace({idx: Tstar})
                new = potential(inst, cand.uncovered, orders)
                if new < current:
                    return cand, new, (j, e, idx, sorted(F))
    return None


def build_no_deadlock_family(
    inst: ColouredInstance, cfg: CoverConfig, order: Sequence[int] | None = None
) -> NoDeadlockResult:
    n = inst.n
    size = family_size(n, cfg.lam)
    notes = []
    if size < n + 1:
        notes.append(f"family size {size} is below n+1")
    k, substituted = deadlock_parameter(n, cfg.lam)
    if substituted:
        notes.append("floor(lambda n) = 0; using k = 1")
    orders = ladder(n, cfg.lam)
    pool = list(order) if order is not None else None
    fam = inclusion_maximal_extend(RainbowFamily.empty(inst, size), cfg.ell, cfg.r, pool)
    cur = potential(inst, fam.uncovered, orders)
    tuples = [cur]
    steps = 0
    while steps < cfg.iteration_budget and _deadlock_or_all(inst, fam.uncovered, k):
        move = _descent_move(inst, fam, orders, cur, broad=False)
        if move is None:
            move = _descent_move(inst, fam, orders, cur, broad=True)
            if move is not None and "broad moves used" not in notes:
                notes.append("broad moves used")
        if move is None:
            break
        fam, cur, _ = move
        fam = inclusion_maximal_extend(fam, cfg.ell, cfg.r, pool)
        new = potential(inst, fam.uncovered, orders)
        if new > cur:
            raise RotaError("extension raised the descent potential")
        cur = new
        tuples.append(cur)
        steps += 1
    D = _deadlock_or_all(inst, fam.uncovered, k)
    return NoDeadlockResult(fam, k, not D, D, orders, tuples, steps, notes)


def colour_counts(inst: ColouredInstance, U: Iterable[int]) -> dict[int, int]:
    out = {c: 0 for c in range(1, inst.n + 1)}
    for x in U:
        out[inst.colour[x]] += 1
    return out


def colour_potential(inst: ColouredInstance, U: Iterable[int]) -> int:
    return sum(v * v for v in colour_counts(inst, U).values())


def balance_colours(
    inst: ColouredInstance, family: RainbowFamily, cfg: CoverConfig
) -> tuple[RainbowFamily, str, dict]:
    """Lower sum_c |B_c & U|^2 by span-preserving swaps; returns (family, status, histogram)."""
    n = inst.n
    k, _ = deadlock_parameter(n, cfg.lam)
    limit = cfg.lam * n
    fam = family
    status = "ok"
    for _ in range(cfg.iteration_budget):
        U = fam.uncovered
        counts = colour_counts(inst, U)
        over = sorted((c for c in counts if counts[c] > limit), key=lambda c: (-counts[c], c))
        if not over:
            break
        moved = False
        spanD = None
        for cp in over:
            Sc = inst.B(cp) & U
            for idx, T in enumerate(fam.members):
                if cp in inst.colours(T):
                    continue
                w = inject_between(inst, Sc, T)
                if w.kind == "single-element":
                    fam = fam.replace({idx: T | {w.element}})
                    moved = True
                    break
                if spanD is None:
                    spanD = inst.matroid.closure(_deadlock_or_all(inst, U, k - 1))
                for x in sorted(w.mapping):
                    y = w.mapping[x]
                    if y in spanD or counts[inst.colour[y]] >= limit / 2:
                        continue
                    before = colour_potential(inst, U)
                    cand = fam.replace({idx: (T - {y}) | {x}})
                    if colour_potential(inst, cand.uncovered) >= before:
                        continue
                    if audit_enabled() and deadlock(inst, cand.uncovered, k).deadlock:
                        raise RotaError("colour balancing created a deadlock")
                    fam = cand
                    moved = True
                    break
                if moved:
                    break
            if moved:
                break
        if not moved:
            status = "partial"
            break
    else:
        status = "partial"
    return fam, status, colour_counts(inst, fam.uncovered)


def peel_rainbow(inst: ColouredInstance, U: Iterable[int], exact_max: int = 0) -> list[frozenset]:
    """Partition U into rainbow independent sets without preconditions."""
    U = frozenset(U)
    if not U:
        return []
    if len(U) <= exact_max:
        mult = max(colour_counts(inst, U).values())
        for parts in range(max(mult, 1), len(U) + 1):
            res = bf_rainbow_decomposition(inst, U, parts, BruteForceBudget(max_ground=exact_max))
            if res is not None:
                return [P for P in res if P]
    out = []
    rest = set(U)
    while rest:
        Q = max_rainbow_independent(inst, rest)
        out.append(Q)
        rest -= Q
    return out


def decompose_leftover(
    inst: ColouredInstance, U: Iterable[int], k: int, exact: bool = False, check: bool = True
) -> list[frozenset]:
    """Rainbow independent sets partitioning U (target: at most 2k of them)."""
    U = frozenset(U)
    if not U:
        return []
    if check:
        if deadlock(inst, U, k).deadlock:
            raise ContractError("U has a nonempty deadlock")
        if max(colour_counts(inst, U).values()) > k:
            raise ContractError("some colour appears more than k times in U")
    if exact and len(U) <= 10:
        res = bf_rainbow_decomposition(inst, U, 2 * k)
        if res is None:
            raise RotaError("no decomposition into 2k rainbow independent sets")
        return [P for P in res if P]
    parts = decompose(inst, U, k).parts
    out: list[set] = []
    spill: set = set()
    for P in parts:
        if not P:
            continue
        Q = max_rainbow_independent(inst, P)
        out.append(set(Q))
        spill |= P - Q
    for x in sorted(spill):
        for S in out:
            if inst.colour[x] not in inst.colours(S) and inst.matroid.is_independent(S | {x}):
                S.add(x)
                break
        else:
            out.append({x})
    return [frozenset(S) for S in out]


def extend_to_bases(
    inst: ColouredInstance, sets: Iterable[Iterable[int]], prefer: Iterable[int] = ()
) -> list[frozenset]:
    """Greedy extension of each rainbow independent set to a transversal basis."""
    prefer = set(prefer)
    out = []
    for S in sets:
        S = set(S)
        if not inst.is_rainbow_independent(S):
            raise ContractError("extension input is not rainbow independent")
        t = inst.matroid.tester_for(S)
        present = inst.colours(S)
        for c in range(1, inst.n + 1):
            if c in present:
                continue
            cands = sorted(inst.B(c), key=lambda x: (x not in prefer, x))
            for x in cands:
                if t.add(x):
                    S.add(x)
                    prefer.discard(x)
                    break
            else:
                raise RotaError(f"colour {c} could not extend an independent set")
        out.append(frozenset(S))
    return out


def prune_cover(inst: ColouredInstance, bases: list[frozenset]) -> list[frozenset]:
    """Drop bases whose private elements can be swapped into the others."""
    bases = list(bases)
    m = inst.matroid
    changed = True
    while changed and len(bases) > 1:
        changed = False
        for qi in sorted(range(len(bases)), key=lambda i: _private_count(bases, i)):
            trial = [set(B) for j, B in enumerate(bases) if j != qi]
            mult: dict[int, int] = {}
            for B in trial:
                for x in B:
                    mult[x] = mult.get(x, 0) + 1
            ok = True
            for x in sorted(bases[qi]):
                if mult.get(x, 0):
                    continue
                c = inst.colour[x]
                placed = False
                for B in trial:
                    y = next(y for y in B if inst.colour[y] == c)
                    if mult[y] < 2:
                        continue
                    if m.is_independent((B - {y}) | {x}):
                        B.discard(y)
                        B.add(x)
                        mult[y] -= 1
                        mult[x] = 1
                        placed = True
                        break
                if not placed:
                    ok = False
                    break
            if ok:
                bases = [frozenset(B) for B in trial]
                changed = True
                break
    return bases


def _private_count(bases, i):
    others = frozenset().union(*(B for j, B in enumerate(bases) if j != i))
    return len(bases[i] - others)


def _verify_cover(inst: ColouredInstance, bases: list[frozenset]) -> None:
    for B in bases:
        if not inst.is_transversal_basis(B):
            raise RotaError("emitted set is not a transversal basis")
    if frozenset().union(*bases) != inst.ground:
        raise RotaError("emitted bases do not cover the ground set")


def _one_pass(inst: ColouredInstance, cfg: CoverConfig, order):
    n = inst.n
    built = build_no_deadlock_family(inst, cfg, order)
    fam = built.family
    audit: dict = {
        "family_size": len(fam),
        "k": built.k,
        "ladder": list(built.ladder),
        "descent_steps": built.steps,
        "potentials": [list(t) for t in built.tuples],
        "no_deadlock_success": built.success,
        "residual_deadlock": len(built.residual_deadlock),
        "notes": list(built.notes),
    }
    if built.success:
        fam, bal_status, hist = balance_colours(inst, fam, cfg)
        audit["balance_status"] = bal_status
        audit["colour_max"] = max(hist.values())
    U = fam.uncovered
    audit["uncovered_after_family"] = len(U)
    k = built.k
    counts = colour_counts(inst, U)
    pre_ok = built.success and not deadlock(inst, U, k).deadlock and max(counts.values()) <= k
    if pre_ok:
        leftover = decompose_leftover(inst, U, k, check=False)
        audit["leftover_mode"] = "partition"
    else:
        leftover = peel_rainbow(inst, U, cfg.exact_leftover_max)
        audit["leftover_mode"] = "peel"
    audit["leftover_sets"] = len(leftover)
    audit["leftover_target_2k"] = 2 * k
    sets = [T for T in fam.members if T] + leftover
    bases = extend_to_bases(inst, sets)
    missing = inst.ground - frozenset().union(*bases) if bases else inst.ground
    if missing:
        audit["fallback_bases"] = len(missing)
        bases += extend_to_bases(inst, [{x} for x in sorted(missing)])
    before = len(bases)
    bases = prune_cover(inst, bases)
    audit["pruned"] = before - len(bases)
    return bases, audit


def cover(inst: ColouredInstance, cfg: CoverConfig | None = None) -> CoverSolution:
    cfg = cfg or CoverConfig()
    n = inst.n
    if cfg.epsilon >= 1:
        warnings.warn("epsilon >= 1", RuntimeWarning, stacklevel=2)
    bases, audit = _one_pass(inst, cfg, None)
    tries = 1
    rng = random.Random(cfg.seed)
    while n >= 2 and len(bases) > 2 * n - 2 and tries <= cfg.retries:
        order = list(inst.sorted_ground)
        rng.shuffle(order)
        alt, alt_audit = _one_pass(inst, cfg, order)
        tries += 1
        if len(alt) < len(bases):
            bases, audit = alt, alt_audit
    audit["passes"] = tries
    if n <= cfg.exact_max_n:
        best, witness = bf_min_cover(inst)
        audit["exact_count"] = best
        if best < len(bases):
            bases = list(witness)
            audit["exact_fallback"] = True
    _verify_cover(inst, bases)
    bases = sorted(bases, key=lambda B: sorted(B))
    audit["bounds"] = {
        "two_n_minus_two": 2 * n - 2,
        "one_plus_eps_n": (1 + cfg.epsilon) * n,
    }
    status = "ok" if n < 2 or len(bases) <= 2 * n - 2 else "over-bound"
    return CoverSolution(bases, True, len(bases), status, audit)
