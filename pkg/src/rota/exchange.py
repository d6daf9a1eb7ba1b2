"""Constructive exchange and injection operations.

Every routine here returns an object that can be re-checked against the
oracle; ``verify_*`` helpers do exactly that and are used by the tests and,
in audit mode, by the routines themselves.
"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass, field

from ._matching import max_matching
from .config import audit_enabled
from .core import ColouredInstance, Matroid, same_span
from .errors import ContractError, RotaError


class ExchangeError(RotaError):
    """An exchange guarantee failed; this points at a broken oracle."""


@dataclass(frozen=True)
class ExchangeWitness:
    kind: str  # "augmented-set", "injection", "bijection" or "single-element"
    mapping: dict = field(default_factory=dict)
    element: int | None = None
    members: frozenset = frozenset()

    def to_json(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.kind in ("injection", "bijection"):
            out["mapping"] = {str(k): v for k, v in sorted(self.mapping.items())}
        elif self.kind == "single-element":
            out["element"] = self.element
        else:
            out["set"] = sorted(self.members)
        return out


def _require_independent(m: Matroid, S, name: str) -> None:
    if not m.is_independent(S):
        raise ContractError(f"{name} is not independent")


def _require_rainbow_independent(inst: ColouredInstance, S, name: str) -> None:
    if not inst.is_rainbow(S):
        raise ContractError(f"{name} is not rainbow")
    _require_independent(inst.matroid, S, name)


def extend_to_basis(m: Matroid, S: Iterable[int], pool: Iterable[int] | None = None) -> list[int]:
    """Greedy extension of independent ``S`` by lowest-id elements of ``pool``."""
    S = list(S)
    t = m.tester_for(S)
    if t.rank != len(S):
        raise ContractError("cannot extend a dependent set")
    for y in sorted(m.ground if pool is None else pool):
        t.add(y)
    return list(t.members)


# ---------------------------------------------------------------------------


def rainbow_augment(inst: ColouredInstance, S: Iterable[int], T: Iterable[int]) -> frozenset[int]:
    """Rainbow independent ``S*`` with S <= S* <= S|T and |T - S*| <= 2|S - T|.

    Elements of ``T`` are added greedily by id, skipping colour clashes.
    Colours of T - S that clash with S are at most |S - T| by rainbowness,
    and the remaining candidates lose at most |S - T| more to dependency.
    """
    S, T = set(S), set(T)
    _require_rainbow_independent(inst, S, "S")
    _require_rainbow_independent(inst, T, "T")
    used = inst.colours(S)
    tester = inst.matroid.tester_for(S)
    for y in sorted(T - S):
        c = inst.colour[y]
        if c not in used and tester.add(y):
            used.add(c)
    out = frozenset(tester.members)
    if audit_enabled():
        verify_rainbow_augment(inst, S, T, out)
    return out


def verify_rainbow_augment(inst, S, T, out) -> None:
    S, T, out = set(S), set(T), set(out)
    if not (S <= out <= S | T):
        raise ExchangeError("augmented set escapes S|T or drops part of S")
    if not inst.is_rainbow_independent(out):
        raise ExchangeError("augmented set is not rainbow independent")
    if len(T - out) > 2 * len(S - T):
        raise ExchangeError("augmented set misses too much of T")


def basis_exchange_bijection(inst_or_m, B: Iterable[int], Bp: Iterable[int]) -> ExchangeWitness:
    """Bijection psi: B -> B' with B' - psi(x) + x independent for each x.

    Found as a perfect matching in the exchange graph; Hall's condition
    always holds there, so a deficient matching means the oracle is broken.
    """
    m = _matroid(inst_or_m)
    B, Bp = sorted(set(B)), sorted(set(Bp))
    r = m.rank(m.ground)
    if len(B) != r or len(Bp) != r or not m.is_independent(B) or not m.is_independent(Bp):
        raise ContractError("both arguments must be bases")
    adj = _exchange_adjacency(m, B, Bp)
    psi = max_matching(adj, B)
    if len(psi) != len(B):
        raise ExchangeError("exchange graph has no perfect matching")
    w = ExchangeWitness("bijection", mapping=psi)
    if audit_enabled():
        verify_bijection(m, B, Bp, psi)
    return w


def _exchange_adjacency(m: Matroid, B: list[int], Bp: list[int]) -> dict[int, list[int]]:
    # x' is adjacent to x iff x is not spanned by B' - x'; one tester per x'
    Bp_set = set(Bp)
    adj: dict[int, list[int]] = {x: [] for x in B}
    outside = [x for x in B if x not in Bp_set]
    for xp in Bp:
        t = m.tester_for(y for y in Bp if y != xp)
        flags = t.in_span_many(outside)
        for x, spanned in zip(outside, flags):
            if not spanned:
                adj[x].append(xp)
    for x in B:
        if x in Bp_set:
            # B' - x + x = B'; keep the identity first so it is preferred
            adj[x].insert(0, x)
    return adj


def verify_bijection(m: Matroid, B, Bp, psi: dict) -> None:
    B, Bp = set(B), set(Bp)
    if set(psi) != B or set(psi.values()) != Bp or len(set(psi.values())) != len(B):
        raise ExchangeError("psi is not a bijection B -> B'")
    for x, xp in psi.items():
        if not m.is_independent((Bp - {xp}) | {x}) or (x in Bp - {xp}):
            raise ExchangeError(f"B' - {xp} + {x} is dependent")


def inject_to_basis(inst_or_m, S: Iterable[int], B: Iterable[int]) -> ExchangeWitness:
    """Injection phi: S -> B with S - x + phi(x) and S + b (b unused) independent."""
    m = _matroid(inst_or_m)
    S, B = sorted(set(S)), sorted(set(B))
    _require_independent(m, S, "S")
    Bp = extend_to_basis(m, S, B)
    psi = basis_exchange_bijection(m, B, Bp).mapping
    inverse = {xp: x for x, xp in psi.items()}
    phi = {x: inverse[x] for x in S}
    if audit_enabled():
        verify_injection_to_basis(m, S, B, phi)
    return ExchangeWitness("injection", mapping=phi)


def verify_injection_to_basis(m: Matroid, S, B, phi: dict) -> None:
    S, B = set(S), set(B)
    if set(phi) != S or len(set(phi.values())) != len(S) or not set(phi.values()) <= B:
        raise ExchangeError("phi is not an injection S -> B")
    for x, b in phi.items():
        rest = S - {x}
        if b in rest or not m.is_independent(rest | {b}):
            raise ExchangeError(f"S - {x} + {b} is dependent")
    for b in B - set(phi.values()):
        if b in S or not m.is_independent(S | {b}):
            raise ExchangeError(f"S + {b} is dependent")


def inject_between(inst_or_m, S: Iterable[int], T: Iterable[int]) -> ExchangeWitness:
    """Either some x in S with T + x independent, or a span-preserving injection S -> T.

    The single-element outcome is preferred and returns the lowest such id.
    """
    m = _matroid(inst_or_m)
    S, T = sorted(set(S)), sorted(set(T))
    _require_independent(m, S, "S")
    _require_independent(m, T, "T")
    Tset = set(T)
    tT = m.tester_for(T)
    outside = [x for x in S if x not in Tset]
    for x, spanned in zip(outside, tT.in_span_many(outside)):
        if not spanned:
            return ExchangeWitness("single-element", element=x)
    # every x in S is spanned by T, so psi lands inside T on S
    BS = extend_to_basis(m, S)
    BT = extend_to_basis(m, T)
    psi = basis_exchange_bijection(m, BS, BT).mapping
    phi = {x: psi[x] for x in S}
    if any(y not in Tset for y in phi.values()):
        raise ExchangeError("injection left T although S is spanned by T")
    if audit_enabled():
        verify_injection_between(m, S, T, phi)
    return ExchangeWitness("injection", mapping=phi)


def verify_injection_between(m: Matroid, S, T, phi: dict) -> None:
    S, T = set(S), set(T)
    if set(phi) != S or len(set(phi.values())) != len(S) or not set(phi.values()) <= T:
        raise ExchangeError("phi is not an injection S -> T")
    for x, y in phi.items():
        rest = T - {y}
        if x in rest:
            raise ExchangeError(f"T - {y} + {x} repeats {x}")
        swapped = rest | {x}
        if not m.is_independent(swapped) or not same_span(m, swapped, T):
            raise ExchangeError(f"T - {y} + {x} is dependent or changes the span")


def double_switch(inst_or_m, T: Iterable[int], x: int, xp: int, q: int, qp: int) -> tuple[str, frozenset]:
    """Combine two span-preserving swaps of T; returns ("a" | "b", new set).

    "a": T - q' + x.  "b": T - x' - q' + x + q (only when x' != q').
    """
    m = _matroid(inst_or_m)
    T = set(T)
    if x in T or q in T or xp not in T or qp not in T:
        raise ContractError("need x, q outside T and x', q' inside T")
    _require_independent(m, T, "T")
    for a, b in ((x, xp), (q, qp)):
        s = (T - {b}) | {a}
        if not m.is_independent(s) or not same_span(m, s, T):
            raise ContractError(f"T - {b} + {a} must be independent with the span of T")
    cand_a = (T - {qp}) | {x}
    if m.is_independent(cand_a) and len(cand_a) == len(T):
        out = ("a", frozenset(cand_a))
    else:
        cand_b = (T - {xp, qp}) | {x, q}
        if xp == qp or x == q or not m.is_independent(cand_b):
            raise ExchangeError("neither switch outcome holds")
        out = ("b", frozenset(cand_b))
    if not same_span(m, out[1], T):
        raise ExchangeError("switched set changed the span")
    return out


def _matroid(inst_or_m) -> Matroid:
    return inst_or_m.matroid if isinstance(inst_or_m, ColouredInstance) else inst_or_m
