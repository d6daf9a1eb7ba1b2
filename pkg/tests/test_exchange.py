import random
from itertools import combinations, permutations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import any_instance, gf2, random_basis, random_independent, random_rainbow_independent
from rota.core import ColouredInstance, LinearMatroid
from rota.errors import ContractError
from rota.exchange import (
    basis_exchange_bijection,
    double_switch,
    extend_to_basis,
    inject_between,
    inject_to_basis,
    rainbow_augment,
)
from rota.generate import random_linear_instance


def spans_equal(m, A, B):
    A, B = set(A), set(B)
    return m.rank(A) == m.rank(B) == m.rank(A | B)


# --- rainbow_augment ----------------------------------------------------------


def check_rainbow_augment(inst, S, T, out):
    assert S <= out <= S | T
    assert inst.is_rainbow_independent(out)
    assert len(T - out) <= 2 * len(S - T)
    assert len(out) >= len(T) - 2 * len(S - T)


def test_rainbow_augment_trivial_cases():
    inst = random_linear_instance(3, 5, 0)
    rng = random.Random(0)
    T = random_rainbow_independent(inst, rng, size=3)
    assert rainbow_augment(inst, set(), T) == T
    assert rainbow_augment(inst, T, T) == T


def test_rainbow_augment_clash_and_dependency():
    # rank 2 over GF(3); S = {s} clashes in colour with t1 and spans t2 with t1
    vecs = {0: (1, 0), 1: (0, 1), 2: (1, 1), 3: (1, 2)}
    inst = ColouredInstance(2, LinearMatroid(3, vecs), [[0, 1], [2, 3]])
    S, T = {0}, {1, 2}
    out = rainbow_augment(inst, S, T)
    check_rainbow_augment(inst, S, T, out)
    # every valid choice keeps at least |T| - 2 elements; enumerate them
    best = max(
        len(X) for k in range(4) for X in map(set, combinations(S | T, k))
        if S <= X and inst.is_rainbow_independent(X)
    )
    assert len(out) == best


def test_rainbow_augment_rejects_bad_input():
    inst = random_linear_instance(2, 3, 1)
    B1 = sorted(inst.B(1))
    with pytest.raises(ContractError):
        rainbow_augment(inst, B1, [])


@given(st.integers(0, 100_000))
def test_rainbow_augment_property(seed):
    rng = random.Random(seed)
    inst = any_instance(seed)
    S = random_rainbow_independent(inst, rng)
    T = random_rainbow_independent(inst, rng)
    check_rainbow_augment(inst, S, T, rainbow_augment(inst, S, T))


# --- basis exchange bijection --------------------------------------------------


def check_bijection(m, B, Bp, psi):
    assert set(psi) == set(B) and set(psi.values()) == set(Bp)
    for x, y in psi.items():
        assert m.is_independent((set(Bp) - {y}) | {x})


def test_bijection_identity():
    inst = random_linear_instance(3, 5, 2)
    B = inst.B(1)
    psi = basis_exchange_bijection(inst, B, B).mapping
    assert psi == {x: x for x in B}


def test_bijection_matches_enumeration():
    m = gf2([(1, 0), (0, 1), (1, 1)])
    psi = basis_exchange_bijection(m, [0, 1], [0, 2]).mapping
    valid = [
        dict(zip([0, 1], p)) for p in permutations([0, 2])
        if all(m.is_independent(({0, 2} - {p[i]}) | {x}) for i, x in enumerate([0, 1]))
    ]
    assert len(valid) == 2 and psi in valid
    # only the identity on the shared element survives when 1 -> 0 is blocked
    m2 = gf2([(1, 0), (0, 1), (1, 0)])
    assert basis_exchange_bijection(m2, [0, 1], [2, 1]).mapping == {0: 2, 1: 1}


@given(st.integers(0, 100_000))
def test_bijection_property(seed):
    rng = random.Random(seed)
    inst = any_instance(seed)
    B, Bp = random_basis(inst, rng), random_basis(inst, rng)
    check_bijection(inst.matroid, B, Bp, basis_exchange_bijection(inst, B, Bp).mapping)


# --- injections ---------------------------------------------------------------


def check_inject_to_basis(m, S, B, phi):
    assert set(phi) == set(S) and len(set(phi.values())) == len(S) and set(phi.values()) <= set(B)
    for x, b in phi.items():
        assert m.is_independent((set(S) - {x}) | {b})
    for b in set(B) - set(phi.values()):
        assert b not in S and m.is_independent(set(S) | {b})


def test_inject_to_basis_empty_and_full():
    inst = random_linear_instance(3, 5, 3)
    B = inst.B(2)
    assert inject_to_basis(inst, [], B).mapping == {}
    phi = inject_to_basis(inst, B, B).mapping
    check_inject_to_basis(inst.matroid, B, B, phi)


@given(st.integers(0, 100_000))
def test_inject_to_basis_property(seed):
    rng = random.Random(seed)
    inst = any_instance(seed)
    S, B = random_independent(inst, rng), random_basis(inst, rng)
    check_inject_to_basis(inst.matroid, S, B, inject_to_basis(inst, S, B).mapping)


def check_inject_between(m, S, T, w):
    S, T = set(S), set(T)
    if w.kind == "single-element":
        x = w.element
        assert x in S and x not in T and m.is_independent(T | {x})
        # lowest id among the qualifying elements
        assert x == min(y for y in S - T if m.is_independent(T | {y}))
        return
    # case (b) is only returned when case (a) is impossible
    assert all(m.rank(T | {y}) == m.rank(T) for y in S)
    phi = w.mapping
    assert set(phi) == S and len(set(phi.values())) == len(S) and set(phi.values()) <= T
    for x, y in phi.items():
        swapped = (T - {y}) | {x}
        assert len(swapped) == len(T) and m.is_independent(swapped)
        assert spans_equal(m, swapped, T)


def test_inject_between_examples():
    inst = random_linear_instance(3, 5, 4)
    e = min(inst.ground)
    w = inject_between(inst, [e], [e])
    assert w.kind == "injection" and w.mapping == {e: e}
    B = sorted(inst.B(1))
    w = inject_between(inst, [B[2]], B[:2])
    assert w.kind == "single-element" and w.element == B[2]


@given(st.integers(0, 100_000))
def test_inject_between_property(seed):
    rng = random.Random(seed)
    inst = any_instance(seed)
    T = random_independent(inst, rng)
    # bias S into spn(T) half the time so case (b) gets exercised
    pool = inst.matroid.closure(T) if rng.random() < 0.5 else None
    S = random_independent(inst, rng, pool=pool)
    check_inject_between(inst.matroid, S, T, inject_between(inst, S, T))


# --- double switch ------------------------------------------------------------


def double_switch_case(inst, rng):
    """Random (T, x, x', q, q') meeting the preconditions, or None."""
    m = inst.matroid
    T = random_independent(inst, rng, size=rng.randint(1, inst.n))
    outside = sorted(m.closure(T) - T)
    swaps = [
        (x, y) for x in outside for y in sorted(T)
        if m.is_independent((T - {y}) | {x}) and spans_equal(m, (T - {y}) | {x}, T)
    ]
    if not swaps:
        return None
    (x, xp), (q, qp) = rng.choice(swaps), rng.choice(swaps)
    return T, x, xp, q, qp


def check_double_switch(m, T, x, xp, q, qp, case, out):
    if case == "a":
        assert out == (T - {qp}) | {x}
    else:
        assert xp != qp and out == (T - {xp, qp}) | {x, q}
    assert len(out) == len(T) and m.is_independent(out) and spans_equal(m, out, T)


def test_double_switch_forced_a_when_same_target():
    rng = random.Random(5)
    for seed in range(40):
        inst = random_linear_instance(4, 5, seed)
        case = double_switch_case(inst, rng)
        if case is None:
            continue
        T, x, xp, _, _ = case
        m = inst.matroid
        for q in sorted(m.closure(T) - T):
            swapped = (T - {xp}) | {q}
            if not (m.is_independent(swapped) and spans_equal(m, swapped, T)):
                continue
            kind, out = double_switch(inst, T, x, xp, q, xp)
            assert kind == "a" and out == (T - {xp}) | {x}


def test_double_switch_same_x():
    rng = random.Random(6)
    for seed in range(40):
        inst = random_linear_instance(4, 5, seed)
        case = double_switch_case(inst, rng)
        if case is None:
            continue
        T, x, xp, _, _ = case
        m = inst.matroid
        others = [y for y in T if y != xp and m.is_independent((T - {y}) | {x})]
        for qp in others:
            kind, _ = double_switch(inst, T, x, xp, x, qp)
            assert kind == "a"


def test_double_switch_precondition():
    inst = random_linear_instance(3, 5, 0)
    T = sorted(inst.B(1))
    with pytest.raises(ContractError):
        double_switch(inst, T, T[0], T[1], T[0], T[1])


@given(st.integers(0, 100_000))
def test_double_switch_property(seed):
    rng = random.Random(seed)
    inst = any_instance(seed, n=4)
    case = double_switch_case(inst, rng)
    if case is None:
        return
    T, x, xp, q, qp = case
    kind, out = double_switch(inst, T, x, xp, q, qp)
    check_double_switch(inst.matroid, T, x, xp, q, qp, kind, out)


def test_extend_to_basis():
    inst = random_linear_instance(4, 5, 1)
    rng = random.Random(1)
    S = random_independent(inst, rng, size=2)
    B = extend_to_basis(inst.matroid, S)
    assert set(S) <= set(B) and len(B) == 4 and inst.matroid.is_independent(B)
