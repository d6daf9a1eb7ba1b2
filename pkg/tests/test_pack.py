import math
import random
import warnings

import pytest

from rota.core import ColouredInstance, UniformMatroid
from rota.errors import ContractError, RotaError
from rota.generate import random_graphic_instance, random_linear_instance
from rota.oracle import bf_max_disjoint_transversal_bases
from rota.pack import (
    PackConfig,
    ReservoirConfig,
    build_avoiding_family,
    cascade_depth,
    cascade_improve,
    check_reservoir,
    one_absorbable_colours,
    pack,
    pad_family,
    sample_reservoir,
    small_improvement,
    target_members,
    verify_absorption,
)
from rota.rainbow import RainbowFamily


def is_transversal_basis(inst, B):
    return len(B) == inst.n and len({inst.colour[x] for x in B}) == inst.n and inst.matroid.is_independent(B)


def check_packing(inst, bases):
    assert all(is_transversal_basis(inst, B) for B in bases)
    assert sum(len(B) for B in bases) == len(frozenset().union(*bases)) if bases else True


# --- configuration ------------------------------------------------------------


def test_configs():
    with pytest.raises(ContractError):
        ReservoirConfig(eta=1.5)
    with pytest.raises(ContractError):
        ReservoirConfig(gamma=0)
    with pytest.raises(ContractError):
        PackConfig(epsilon=0)
    with pytest.raises(ContractError):
        PackConfig(improvement_budget=0)
    cfg = PackConfig(epsilon=0.2)
    assert cfg.sigma == pytest.approx(0.2**3 / 20)
    assert cfg.L == 1e6  # 1e7 / 0.2^5 is far above the cap
    with pytest.warns(RuntimeWarning):
        PackConfig(epsilon=0.2, strict_constants=True)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        PackConfig(epsilon=0.05, strict_constants=True)


def test_target_and_depth():
    assert target_members(12, 0.25) == 9
    assert target_members(10, 0.3) == 7
    cfg = PackConfig(epsilon=0.25)
    assert cascade_depth(10, 5, cfg) == 30
    assert cascade_depth(10, 100, cfg) == 2
    small = PackConfig(epsilon=0.25, L=8.0)
    assert cascade_depth(10, 50, small) == math.ceil(math.log(2)) + 2
    assert cascade_depth(10, 5, PackConfig(r_max=4)) == 4


# --- reservoir ----------------------------------------------------------------


def test_reservoir_extremes_and_determinism():
    inst = random_linear_instance(4, 5, 0)
    assert sample_reservoir(inst, ReservoirConfig(eta=0)) == frozenset()
    assert sample_reservoir(inst, ReservoirConfig(eta=1)) == inst.ground
    a = sample_reservoir(inst, ReservoirConfig(eta=0.4, seed=9))
    b = sample_reservoir(inst, ReservoirConfig(eta=0.4, seed=9))
    assert a == b


def test_reservoir_rate():
    inst = random_linear_instance(30, 31, 0, max_n=64)
    R = sample_reservoir(inst, ReservoirConfig(eta=0.3, seed=1))
    # 900 Bernoulli(0.3) draws: mean 270, sd about 13.7
    assert abs(len(R) - 270) < 5 * 13.75


def test_check_reservoir_trivial_cases():
    inst = random_linear_instance(4, 5, 1)
    full = check_reservoir(inst, inst.ground, 0.01, 0.125, 1.0, samples=50)
    assert full.diamond_fraction == 1.0 and full.diamond_violations == []
    empty = check_reservoir(inst, [], 0.01, 0.125, 0.0, samples=50)
    assert empty.spade_violations == 0
    assert empty.to_json()["diamond"]["fraction"] == 1.0


def test_check_reservoir_counts_by_hand():
    inst = random_linear_instance(4, 5, 2)
    R = sample_reservoir(inst, ReservoirConfig(eta=0.5, seed=3))
    rep = check_reservoir(inst, R, 0.25, 0.125, 0.5, samples=10)
    expect = [c for c in range(1, 5) if not 1 <= len(inst.B(c) & R) <= 3]
    assert rep.diamond_violations == expect and rep.size == len(R)


# --- avoiding family ----------------------------------------------------------


def test_avoiding_family_all_reserved():
    inst = random_linear_instance(4, 5, 0)
    fam = build_avoiding_family(inst, 0.25, inst.ground).family
    assert len(fam) == 3 and all(not T for T in fam.members)


@pytest.mark.parametrize("seed", range(5))
def test_avoiding_family_full_count_n2(seed):
    inst = random_linear_instance(2, 3, seed)
    fam = build_avoiding_family(inst, 1e-13, []).family
    assert len(fam) == 2
    best, _ = bf_max_disjoint_transversal_bases(inst)
    assert fam.size() == 2 * best == 4


@pytest.mark.parametrize("seed", range(3))
def test_avoiding_family_misses_reservoir(seed):
    inst = random_linear_instance(12, 7, seed)
    R = sample_reservoir(inst, ReservoirConfig(eta=0.2, seed=seed))
    built = build_avoiding_family(inst, 0.25, R)
    assert len(built.family) == 9
    assert not (built.family.covered & R)
    built.family.validate()
    assert 0 < built.covered / 144 <= 1
    assert built.floor_target < 144


# --- small improvements and absorbable colours --------------------------------


def test_small_improvement_direct():
    inst = random_linear_instance(3, 5, 0)
    B = sorted(inst.B(1))
    fam = RainbowFamily.empty(inst, 1)
    S = small_improvement(inst, [], fam.uncovered)
    assert S is not None and len(S) == 1
    assert small_improvement(inst, [B[0]], []) is None


def test_one_absorbable_immediate_improvement():
    inst = random_linear_instance(3, 5, 0)
    fam = RainbowFamily.empty(inst, 2)
    res = one_absorbable_colours(inst, fam, [], [])
    assert res.improvement is not None and len(res.improvement) == 1
    assert not res.colours


def test_one_absorbable_rejects_basis():
    inst = random_linear_instance(3, 5, 0)
    _, bases = bf_max_disjoint_transversal_bases(inst)
    fam = RainbowFamily.of(inst, bases)
    with pytest.raises(ContractError):
        one_absorbable_colours(inst, fam, bases[0], [])


def crafted_absorbable():
    # found by scanning seeds: member 2 has no small improvement and four absorbable colours
    inst = random_graphic_instance(6, 38)
    R = sample_reservoir(inst, ReservoirConfig(eta=0.3, seed=38))
    fam = pad_family(build_avoiding_family(inst, 0.25, R).family, target_members(6, 0.25))
    return inst, fam, R


def test_one_absorbable_witnesses_verify():
    inst, fam, R = crafted_absorbable()
    T = fam.members[2]
    assert sorted(T) == [2, 10, 13, 21, 35]
    res = one_absorbable_colours(inst, fam, T, R)
    assert res.improvement is None
    assert res.colours == {1, 2, 4, 6}
    assert res.scratch["c_star"] == 5
    U = fam.uncovered
    m = inst.matroid
    checked = 0
    for c in sorted(res.colours):
        S = res.switched(c)
        # same size and span as T, at most two new elements, colour c free
        assert len(S) == len(T) and len(S - T) <= 2
        assert m.rank(S) == m.rank(T) == m.rank(S | T)
        assert c not in {inst.colour[y] for y in S}
        for e in sorted(inst.B(c)):
            if m.rank(T | {e}) == m.rank(T):
                continue
            W = res.witness(e)
            assert W <= U | T | {e}
            assert is_transversal_basis(inst, W) or (
                len({inst.colour[y] for y in W}) == len(W) and m.is_independent(W)
            )
            assert len(W - T) <= 3 and len(W) == len(T) + 1
            verify_absorption(fam.replace({2: T - {e}}) if e in T else fam, [2], e, {2: W})
            checked += 1
    assert checked > 0
    with pytest.raises(ContractError):
        res.witness(next(iter(inst.B(5))))


def test_verify_absorption_rejects_bad_witness():
    inst, fam, R = crafted_absorbable()
    T = fam.members[2]
    e = next(x for x in sorted(fam.uncovered) if x not in T)
    with pytest.raises(RotaError):
        verify_absorption(fam, [2], e, {2: T})
    other = next(j for j, S in enumerate(fam.members) if S and j != 2)
    with pytest.raises(RotaError):
        verify_absorption(fam, [2], e, {2: T | {next(iter(fam.members[other]))}})


# --- cascade ------------------------------------------------------------------


def test_cascade_precondition():
    inst = random_linear_instance(3, 5, 0)
    _, bases = bf_max_disjoint_transversal_bases(inst)
    with pytest.raises(ContractError):
        cascade_improve(inst, RainbowFamily.of(inst, bases), [])


def test_cascade_one_step():
    inst = random_linear_instance(3, 5, 0)
    fam = RainbowFamily.empty(inst, 2)
    res = cascade_improve(inst, fam, [])
    assert res.improved and res.trace["chain_length"] == 0
    assert res.family.size() == 1 and res.chain.total_churn == 1


@pytest.mark.parametrize("seed", range(6))
def test_cascade_all_bases_but_one(seed):
    inst = random_linear_instance(4, 5, seed)
    _, bases = bf_max_disjoint_transversal_bases(inst)
    rng = random.Random(seed)
    j = rng.randrange(len(bases))
    x = rng.choice(sorted(bases[j]))
    fam = RainbowFamily.of(inst, [B - {x} if i == j else B for i, B in enumerate(bases)])
    res = cascade_improve(inst, fam, [])
    assert res.improved and res.trace["chain_length"] <= 1
    assert res.family.size() == fam.size() + 1
    assert all(len(S - T) <= 3 for S, T in zip(res.family.members, fam.members))


@pytest.mark.parametrize("seed", range(6))
def test_cascade_increases_by_one(seed):
    inst = random_linear_instance(8, 7, seed)
    R = sample_reservoir(inst, ReservoirConfig(eta=0.3, seed=seed))
    fam = pad_family(build_avoiding_family(inst, 0.25, R).family, 6)
    res = cascade_improve(inst, fam, R)
    if res.improved:
        res.family.validate()
        assert res.family.size() == fam.size() + 1
        assert res.chain.replay(fam) == res.family
        assert res.trace["r_cost"] == len(res.family.covered & R) - len(fam.covered & R)
    else:
        assert all("stall" in a for a in res.trace["attempts"])


# --- full pipeline ------------------------------------------------------------


def test_pack_n1():
    inst = ColouredInstance(1, UniformMatroid(1, [0]), [[0]])
    assert pack(inst).count == 1


@pytest.mark.parametrize("seed", range(6))
def test_pack_exact_fallback(seed):
    n = 2 + seed % 3
    inst = random_linear_instance(n, 5, seed)
    res = pack(inst, PackConfig(exact_fallback=True))
    assert res.count == n and res.stats["exact"]
    check_packing(inst, res.bases)


@pytest.mark.parametrize("seed", range(4))
def test_pack_gf7(seed):
    n = 8 + 2 * seed
    inst = random_linear_instance(n, 7, seed)
    events = []
    res = pack(inst, PackConfig(epsilon=0.25), ReservoirConfig(seed=seed), on_event=events.append)
    check_packing(inst, res.bases)
    assert res.count >= math.ceil(n / 2)
    assert res.stats["improvements"] == len(events)
    assert res.stats["dropped_members"] == target_members(n, 0.25) - res.count
    assert all(ev["event"] == "improvement" for ev in events)


def test_pack_deterministic():
    inst = random_graphic_instance(8, 3)
    a = pack(inst, PackConfig(), ReservoirConfig(seed=5))
    b = pack(inst, PackConfig(), ReservoirConfig(seed=5))
    assert a.bases == b.bases and a.reservoir == b.reservoir


def test_pack_budget_status():
    inst = random_linear_instance(10, 7, 0)
    res = pack(inst, PackConfig(improvement_budget=1))
    assert res.status in ("budget", "ok", "stalled")
    check_packing(inst, res.bases)
