"""Packing disjoint transversal bases.

Pipeline: a random reservoir R is set aside, a family of about (1-eps) n
disjoint rainbow independent sets is grown inside the rest of the ground
set, and the family is then improved one element at a time.  Each
improvement runs a cascade T_1, T_2, ... of members: an element is
absorbable into the chain when small edits (at most three new elements
per member) let the chain grow by one in total.  As soon as an absorbable
element turns out to be uncovered, the recorded edits are applied.
"""

from __future__ import annotations

import math
import random
import time
import warnings
from collections.abc import Iterable
from dataclasses import dataclass, field

from .config import audit_enabled
from .core import ColouredInstance
from .errors import ContractError, RotaError
from .exchange import double_switch, inject_between
from .oracle import BruteForceBudget, bf_max_disjoint_transversal_bases
from .rainbow import RainbowFamily, SwitchChain, fits, inclusion_maximal_extend


@dataclass(frozen=True)
class ReservoirConfig:
    eta: float = 0.3
    gamma: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.eta <= 1:
            raise ContractError(f"eta must lie in [0, 1], got {self.eta}")
        if self.gamma <= 0:
            raise ContractError(f"gamma must be positive, got {self.gamma}")


L_CAP = 1e6


@dataclass
class PackConfig:
    epsilon: float = 0.25
    sigma: float | None = None
    L: float | None = None
    r_max: int | None = None
    improvement_budget: int = 10_000
    seed_tries: int = 6
    frontier_cap: int = 8
    swap_cap: int = 400
    budget_ms: float | None = None
    exact_fallback: bool = False
    strict_constants: bool = False
    ell: int = 4
    r: int = 1

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ContractError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.strict_constants and self.epsilon >= 0.1:
            warnings.warn("the constants assume epsilon < 1/10; continuing anyway", RuntimeWarning, stacklevel=2)
        if self.sigma is None:
            self.sigma = self.epsilon**3 / 20
        if self.L is None:
            self.L = min(1e7 / self.epsilon**5, L_CAP)
        budgets = [self.improvement_budget, self.seed_tries, self.frontier_cap, self.swap_cap]
        if min(budgets) <= 0 or (self.budget_ms is not None and self.budget_ms <= 0):
            raise ContractError("budgets must be positive")
        if self.r_max is not None and self.r_max < 1:
            raise ContractError("r_max must be at least 1")
        if self.ell <= 3**self.r:
            raise ContractError("need ell > 3^r")


def target_members(n: int, epsilon: float) -> int:
    return math.ceil((1 - epsilon) * n - 1e-12)


def cascade_depth(n: int, s: int, cfg: PackConfig) -> int:
    """Cascade length cap: the proof's value, clamped to 3n (or the override)."""
    if cfg.r_max is not None:
        return cfg.r_max
    s = max(s, 1)
    proven = math.ceil(cfg.L / 8 * math.log(n * n / s)) + 2 if n * n > s else 2
    return max(2, min(proven, 3 * n))


# ---------------------------------------------------------------------------
# reservoir


def sample_reservoir(inst: ColouredInstance, rcfg: ReservoirConfig) -> frozenset:
    """Each element independently with probability eta, in id order."""
    rng = random.Random(rcfg.seed)
    return frozenset(x for x in inst.sorted_ground if rng.random() < rcfg.eta)


@dataclass
class ReservoirReport:
    eta: float
    gamma: float
    size: int
    diamond_ok: int
    diamond_violations: list[int]
    star_violations: int
    spade_violations: int
    triangle_violations: int
    samples: int

    @property
    def diamond_fraction(self) -> float:
        total = self.diamond_ok + len(self.diamond_violations)
        return self.diamond_ok / total if total else 1.0

    def to_json(self) -> dict:
        return {
            "eta": self.eta,
            "gamma": self.gamma,
            "size": self.size,
            "diamond": {"ok": self.diamond_ok, "violations": self.diamond_violations,
                        "fraction": self.diamond_fraction},
            "star_violations": self.star_violations,
            "spade_violations": self.spade_violations,
            "triangle_violations": self.triangle_violations,
            "samples": self.samples,
        }


def _random_independent(inst: ColouredInstance, rng: random.Random) -> list[int]:
    size = rng.randrange(inst.n + 1)
    order = list(inst.sorted_ground)
    rng.shuffle(order)
    t = inst.matroid.tester()
    for x in order:
        if len(t.members) == size:
            break
        t.add(x)
    return list(t.members)


def check_reservoir(
    inst: ColouredInstance,
    R: Iterable[int],
    gamma: float,
    eps_prime: float,
    eta: float,
    samples: int = 200,
    seed: int = 0,
) -> ReservoirReport:
    """Colour counts exactly; the extension and rank properties on random samples."""
    n = inst.n
    R = frozenset(R)
    slack = gamma * n * n
    ok, bad = 0, []
    for c in range(1, n + 1):
        k = len(inst.B(c) & R)
        if (eta - gamma) * n <= k <= (eta + gamma) * n:
            ok += 1
        else:
            bad.append(c)
    rng = random.Random(seed)
    m = inst.matroid
    star = spade = tri = 0
    colours = list(range(1, n + 1))
    for _ in range(samples):
        T = _random_independent(inst, rng)
        C = [c for c in colours if rng.random() < 0.5]
        cands = [x for c in C for x in sorted(inst.B(c))]
        t = m.tester_for(T)
        free = [x for x, sp in zip(cands, t.in_span_many(cands)) if not sp]
        outside = sum(1 for x in free if x not in R)
        inside = len(free) - outside
        if outside < (1 - eta) * (n - len(T)) * len(C) - slack:
            star += 1
        if inside < eta * (n - len(T)) * len(C) - slack:
            spade += 1
        # rank of the reservoir part of a large colour set after deleting <= gamma n^2 elements
        cmin = max(1, math.ceil(eps_prime * n))
        Cq = rng.sample(colours, rng.randrange(cmin, n + 1)) if cmin <= n else colours
        drop = set(rng.sample(sorted(R), min(len(R), int(slack))))
        Q = [x for c in Cq for x in inst.B(c) if x in R and x not in drop]
        if m.rank(Q) < (1 - eps_prime) * n:
            tri += 1
    return ReservoirReport(eta, gamma, len(R), ok, bad, star, spade, tri, samples)


# ---------------------------------------------------------------------------
# initial family


@dataclass
class AvoidingFamily:
    family: RainbowFamily
    covered: int
    floor_target: float


def build_avoiding_family(
    inst: ColouredInstance, epsilon: float, R: Iterable[int], ell: int = 4, r: int = 1,
    eta: float | None = None, nu: float | None = None,
) -> AvoidingFamily:
    """floor((1-eps) n) disjoint rainbow independent sets inside ground - R."""
    R = frozenset(R)
    size = math.floor((1 - epsilon) * inst.n + 1e-12)
    pool = [x for x in inst.sorted_ground if x not in R]
    fam = inclusion_maximal_extend(RainbowFamily.empty(inst, size), ell, r, pool)
    while True:
        moved = relay_move(fam, pool)
        if moved is None:
            break
        fam = inclusion_maximal_extend(moved, ell, r, pool)
    if fam.covered & R:
        raise RotaError("avoiding family touches the reservoir")
    eta = len(R) / len(inst.ground) if eta is None else eta
    nu = (epsilon / 3) ** 2 / 4 if nu is None else nu
    return AvoidingFamily(fam, fam.size(), (1 - eta - nu) * inst.n**2)


def relay_move(family: RainbowFamily, pool: Iterable[int]) -> RainbowFamily | None:
    """Absorb one uncovered e by T_j - y + e and T_k + y, if such a pair of moves exists."""
    inst = family.inst
    covered = family.covered
    members = family.members
    for e in pool:
        if e in covered:
            continue
        for j, T in enumerate(members):
            for y in sorted(T):
                S = (T - {y}) | {e}
                if not inst.is_rainbow_independent(S):
                    continue
                for k, T2 in enumerate(members):
                    if k != j and fits(inst, T2, y):
                        return family.replace({j: S, k: T2 | {y}})
    return None


# ---------------------------------------------------------------------------
# small improvements and absorbable colours


def small_improvement(inst: ColouredInstance, T: Iterable[int], U: Iterable[int]) -> frozenset | None:
    """A rainbow independent S in U + T with |S| > |T| and |S - T| <= 2, if any."""
    T = frozenset(T)
    U = sorted(set(U) - T)
    m = inst.matroid
    tcol = {inst.colour[y]: y for y in T}
    base = m.tester_for(T)
    for x, sp in zip(U, base.in_span_many(U)):
        if not sp and inst.colour[x] not in tcol:
            return T | {x}
    # T - y + x1 + x2: first a same-size rainbow swap, then one more element
    for x1 in U:
        c1 = inst.colour[x1]
        drops = [tcol[c1]] if c1 in tcol else sorted(T)
        for y in drops:
            S = (T - {y}) | {x1}
            t = m.tester_for(S)
            if t.rank != len(S):
                continue
            cols = inst.colours(S)
            rest = [x for x in U if x != x1 and inst.colour[x] not in cols]
            for x2, sp in zip(rest, t.in_span_many(rest)):
                if not sp:
                    return S | {x2}
    return None


@dataclass
class AbsorbableColours:
    """Colours c such that every element of B_c outside spn(T) is (T)-absorbable."""

    inst: ColouredInstance
    T: frozenset
    colours: frozenset
    records: dict  # colour -> (x, x', q, q')
    improvement: frozenset | None = None
    scratch: dict = field(default_factory=dict)

    def switched(self, c: int) -> frozenset:
        """Same-size, same-span rainbow edit of T (at most two new elements) missing colour c."""
        x, xp, q, qp = self.records[c]
        _, S = double_switch(self.inst, self.T, x, xp, q, qp)
        return S

    def witness(self, e: int) -> frozenset:
        c = self.inst.colour[e]
        if c not in self.colours:
            raise ContractError(f"colour {c} is not among the absorbable colours")
        S = self.switched(c)
        if not fits(self.inst, S, e):
            raise ContractError(f"element {e} lies in the span of T")
        return S | {e}


def one_absorbable_colours(
    inst: ColouredInstance, family: RainbowFamily, T: Iterable[int], R: Iterable[int]
) -> AbsorbableColours:
    T = frozenset(T)
    n = inst.n
    if len(T) >= n:
        raise ContractError("T is already a basis")
    U = family.uncovered
    imp = small_improvement(inst, T, U)
    if imp is not None:
        return AbsorbableColours(inst, T, frozenset(), {}, imp)
    present = inst.colours(T)
    c_star = min(c for c in range(1, n + 1) if c not in present)
    side = sorted(inst.B(c_star) & U)
    w = inject_between(inst, side, T)
    if w.kind == "single-element":
        return AbsorbableColours(inst, T, frozenset(), {}, T | {w.element})
    phi_star = w.mapping
    by_colour = {inst.colour[y]: x for x, y in phi_star.items()}  # colour of phi*(x) -> x
    R = frozenset(R)
    pool = [q for c in sorted(by_colour) for q in sorted(inst.B(c) & R & U)]
    t = inst.matroid.tester()
    for q in pool:
        t.add(q)
    Q_star = list(t.members)
    w2 = inject_between(inst, Q_star, T)
    if w2.kind == "single-element":
        q = w2.element
        x = by_colour[inst.colour[q]]
        S = (T - {phi_star[x]}) | {x, q}
        return AbsorbableColours(inst, T, frozenset(), {}, S)
    phi_prime = w2.mapping
    records = {}
    for q, qp in phi_prime.items():
        x = by_colour[inst.colour[q]]
        records[inst.colour[qp]] = (x, phi_star[x], q, qp)
    scratch = {
        "c_star": c_star,
        "phi_star": dict(phi_star),
        "C_star": sorted(by_colour),
        "Q_star": sorted(Q_star),
        "phi_prime": dict(phi_prime),
    }
    return AbsorbableColours(inst, T, frozenset(records), records, None, scratch)


# ---------------------------------------------------------------------------
# cascade


@dataclass
class CascadeResult:
    family: RainbowFamily
    improved: bool
    chain: SwitchChain | None
    trace: dict


def _edits(inst: ColouredInstance, F: RainbowFamily, j: int, R, cfg: PackConfig):
    """Same-size rainbow edits T'' of member j, as (T'', free colours).

    Returns ("improve", S) instead when a direct enlargement exists.
    """
    T = F.members[j]
    U = F.uncovered
    n = inst.n
    res = one_absorbable_colours(inst, F, T, R)
    if res.improvement is not None:
        return "improve", res.improvement
    allc = set(range(1, n + 1))
    out = [(T, allc - inst.colours(T))]
    for c in sorted(res.colours):
        out.append((res.switched(c), {c}))
    # single swaps T - y + x with x uncovered
    m = inst.matroid
    tcol = {inst.colour[y]: y for y in T}
    swaps = 0
    for x in sorted(U):
        c = inst.colour[x]
        drops = [tcol[c]] if c in tcol else sorted(T)
        for y in drops:
            S = (T - {y}) | {x}
            if m.is_independent(S):
                out.append((S, allc - inst.colours(S)))
                swaps += 1
            if swaps >= cfg.swap_cap:
                break
        if swaps >= cfg.swap_cap:
            break
    return "edits", (out, res)


def _absorbable_into(inst, F: RainbowFamily, j: int, R, cfg: PackConfig):
    """Map element -> enlarged member j (T'' + e) for elements absorbable into member j."""
    kind, data = _edits(inst, F, j, R, cfg)
    if kind == "improve":
        return kind, data
    edits, res = data
    m = inst.matroid
    T = F.members[j]
    found: dict[int, frozenset] = {}
    for S, free in edits:
        cands = [e for c in sorted(free) for e in sorted(inst.B(c)) if e not in T and e not in S and e not in found]
        if not cands:
            continue
        t = m.tester_for(S)
        for e, sp in zip(cands, t.in_span_many(cands)):
            if not sp:
                found[e] = S | {e}
    return "found", (found, res)


def verify_absorption(family: RainbowFamily, chain: list[int], e: int, witness: dict) -> None:
    """Check the three clauses of absorbability for one witness."""
    inst = family.inst
    allowed = family.uncovered | frozenset().union(*(family.members[i] for i in chain)) | {e}
    if any(e in family.members[i] for i in chain):
        raise RotaError(f"{e} already lies in the chain")
    seen: set = set()
    for i in chain:
        S = witness[i]
        if not S <= allowed:
            raise RotaError(f"witness for member {i} leaves the allowed pool")
        if seen & S:
            raise RotaError("witness sets overlap")
        seen |= S
        if not inst.is_rainbow_independent(S):
            raise RotaError(f"witness for member {i} is not rainbow independent")
        if len(S - family.members[i]) > 3:
            raise RotaError(f"witness for member {i} changes more than three elements")
    if sum(len(witness[i]) for i in chain) < sum(len(family.members[i]) for i in chain) + 1:
        raise RotaError("witness does not enlarge the chain")


def cascade_improve(
    inst: ColouredInstance,
    family: RainbowFamily,
    R: Iterable[int],
    cfg: PackConfig | None = None,
    seed_order: list[int] | None = None,
) -> CascadeResult:
    """Find a family with one more covered element, via absorbable-element cascades."""
    cfg = cfg or PackConfig()
    n = inst.n
    R = frozenset(R)
    target = len(family) * n
    size = family.size()
    if size >= target:
        raise ContractError("family is already a family of bases")
    s = target - size
    r_max = cascade_depth(n, s, cfg)
    deficient = [j for j, T in enumerate(family.members) if len(T) < n]
    order = seed_order or sorted(deficient, key=lambda j: (len(family.members[j]), j))
    order = [j for j in order if j in deficient][: cfg.seed_tries]
    trace: dict = {
        "s": s, "r_max": r_max, "below_three_quarters": size < 0.75 * n * n,
        "attempts": [], "r_before": len(family.covered & R),
    }
    for t1 in order:
        attempt = {"T1": t1, "chain": [t1], "m": [], "growth": []}
        trace["attempts"].append(attempt)
        chain = [t1]
        frontier: dict = {None: {}}  # e -> replacement sets for chain[:-1]
        m_prev = 0
        for r in range(1, r_max):
            j = chain[-1]
            found: dict[int, dict] = {}
            host = family.host()
            for e in sorted(frontier, key=lambda v: -1 if v is None else v)[: cfg.frontier_cap]:
                wit = frontier[e]
                upd = dict(wit)
                if e is not None:
                    upd[j] = family.members[j] - {e}
                F = family.replace(upd)
                kind, data = _absorbable_into(inst, F, j, R, cfg)
                if kind == "improve":
                    return _finish(family, F.replace({j: data}), R, trace, chain, e)
                absorb, _ = data
                Fun = F.uncovered
                earlier = frozenset().union(*wit.values()) if wit else frozenset()
                for e2, Tj in absorb.items():
                    if e2 in Fun:
                        return _finish(family, F.replace({j: Tj}), R, trace, chain, e2)
                    if e2 in earlier:
                        continue
                    if host.get(e2) in chain:
                        continue
                    if e2 not in found:
                        w = dict(wit)
                        w[j] = Tj
                        found[e2] = w
            if not found:
                attempt["stall"] = r
                break
            counts: dict[int, int] = {}
            for e2 in found:
                counts[host[e2]] = counts.get(host[e2], 0) + 1
            nxt = min(counts, key=lambda i: (-counts[i], i))
            m_now = counts[nxt]
            base = m_prev + n - len(family.members[j])
            attempt["m"].append(m_now)
            attempt["growth"].append(m_now / base if base else None)
            frontier = {e2: w for e2, w in found.items() if host[e2] == nxt}
            if audit_enabled():
                for e2, w in frontier.items():
                    verify_absorption(family, chain, e2, w)
            chain.append(nxt)
            attempt["chain"] = list(chain)
            m_prev = m_now
        else:
            attempt["stall"] = "r_max"
    return CascadeResult(family, False, None, trace)


def _finish(before: RainbowFamily, after: RainbowFamily, R, trace, chain, e) -> CascadeResult:
    after.validate()
    if after.size() != before.size() + 1:
        raise RotaError("cascade changed the family size by more than one")
    for T, S in zip(before.members, after.members):
        if len(S - T) > 3:
            raise RotaError("cascade edited a member by more than three elements")
    sc = SwitchChain.between(before, after)
    trace["improved"] = True
    trace["chain_length"] = len(chain) - 1
    trace["r_cost"] = len(after.covered & R) - trace["r_before"]
    trace["absorbed"] = e
    return CascadeResult(after, True, sc, trace)


# ---------------------------------------------------------------------------
# full pipeline


@dataclass
class PackResult:
    bases: list[frozenset]
    family: RainbowFamily
    reservoir: frozenset
    stats: dict
    status: str = "ok"

    @property
    def count(self) -> int:
        return len(self.bases)


def pad_family(family: RainbowFamily, members: int) -> RainbowFamily:
    """Append empty members until the family has ``members`` sets."""
    extra = members - len(family)
    if extra <= 0:
        return family
    return RainbowFamily(family.inst, family.members + tuple(frozenset() for _ in range(extra)))


def pack(
    inst: ColouredInstance,
    cfg: PackConfig | None = None,
    rcfg: ReservoirConfig | None = None,
    on_event=None,
) -> PackResult:
    """Disjoint transversal bases; ``on_event`` receives one dict per improvement."""
    cfg = cfg or PackConfig()
    rcfg = rcfg or ReservoirConfig()
    n = inst.n
    start = time.monotonic()
    if cfg.exact_fallback and n <= 4:
        count, bases = bf_max_disjoint_transversal_bases(inst, BruteForceBudget())
        stats = {"improvements": 0, "max_chain": 0, "growth_factors": [], "exact": True,
                 "dropped_members": 0, "r_costs": []}
        fam = RainbowFamily.of(inst, bases)
        return PackResult(_check_bases(inst, bases), fam, frozenset(), stats)
    R = sample_reservoir(inst, rcfg)
    built = build_avoiding_family(inst, cfg.epsilon, R, cfg.ell, cfg.r, eta=rcfg.eta)
    fam = pad_family(built.family, target_members(n, cfg.epsilon))
    stats: dict = {
        "improvements": 0, "max_chain": 0, "growth_factors": [], "r_costs": [],
        "initial_covered": built.covered, "initial_floor": built.floor_target,
        "stalls": 0, "exact": False,
    }
    status = "ok"
    memo: list[int] = []
    while fam.size() < len(fam) * n:
        if stats["improvements"] >= cfg.improvement_budget:
            status = "budget"
            break
        if cfg.budget_ms is not None and (time.monotonic() - start) * 1000 > cfg.budget_ms:
            status = "budget"
            break
        s = len(fam) * n - fam.size()
        res = cascade_improve(inst, fam, R, cfg, seed_order=_seed_order(fam, n, memo))
        if not res.improved:
            stats["stalls"] += 1
            status = "stalled"
            stats["last_trace"] = res.trace
            break
        fam = res.family
        stats["improvements"] += 1
        if on_event is not None:
            on_event({"event": "improvement", "deficiency": s, "chain_length": res.trace["chain_length"],
                      "r_cost": res.trace["r_cost"], "switch": res.chain.to_json()})
        stats["max_chain"] = max(stats["max_chain"], res.trace["chain_length"])
        stats["r_costs"].append({"cost": res.trace["r_cost"],
                                 "allowance": cfg.L * math.log(n * n / s) if n * n > s else 0.0})
        for a in res.trace["attempts"]:
            stats["growth_factors"].extend(g for g in a["growth"] if g is not None)
            if len(a["chain"]) > 1:
                memo = [a["chain"][0]] + [i for i in memo if i != a["chain"][0]]
    bases = [T for T in fam.members if len(T) == n]
    stats["dropped_members"] = len(fam) - len(bases)
    stats["growth_target"] = 1 + cfg.epsilon / 4
    return PackResult(_check_bases(inst, bases), fam, R, stats, status)


def _seed_order(fam: RainbowFamily, n: int, memo: list[int]) -> list[int]:
    deficient = sorted((j for j, T in enumerate(fam.members) if len(T) < n),
                       key=lambda j: (len(fam.members[j]), j))
    first = [j for j in memo if j in deficient]
    return first + [j for j in deficient if j not in first]


def _check_bases(inst: ColouredInstance, bases) -> list[frozenset]:
    seen: set = set()
    for B in bases:
        if not inst.is_transversal_basis(B):
            raise RotaError("packed set is not a transversal basis")
        if seen & B:
            raise RotaError("packed bases overlap")
        seen |= B
    return [frozenset(B) for B in bases]
