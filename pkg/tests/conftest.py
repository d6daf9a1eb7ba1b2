import random
from itertools import combinations

import pytest
from hypothesis import HealthCheck, settings

from rota.core import ColouredInstance, GraphicMatroid, LinearMatroid
from rota.generate import random_graphic_instance, random_linear_instance

settings.register_profile("rota", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("rota")


def linear(n, p, seed):
    return random_linear_instance(n, p, seed)


def graphic(n, seed):
    return random_graphic_instance(n, seed)


def any_instance(seed, n=None):
    """Alternate linear and graphic instances of small rank."""
    rng = random.Random(seed)
    n = n or rng.randint(2, 4)
    if seed % 2:
        return graphic(n, seed)
    return linear(n, rng.choice([2, 3, 5, 7]), seed)


def random_independent(inst, rng, pool=None, size=None):
    pool = sorted(inst.ground if pool is None else pool)
    rng.shuffle(pool)
    size = rng.randint(0, inst.n) if size is None else size
    t = inst.matroid.tester()
    for x in pool:
        if len(t.members) >= size:
            break
        t.add(x)
    return frozenset(t.members)


def random_rainbow_independent(inst, rng, pool=None, size=None):
    pool = sorted(inst.ground if pool is None else pool)
    rng.shuffle(pool)
    size = rng.randint(0, inst.n) if size is None else size
    t = inst.matroid.tester()
    used = set()
    for x in pool:
        if len(t.members) >= size:
            break
        if inst.colour[x] not in used and t.add(x):
            used.add(inst.colour[x])
    return frozenset(t.members)


def random_basis(inst, rng):
    return random_independent(inst, rng, size=inst.n)


def rank_by_enumeration(m, S):
    """Largest independent subset, found by trying every subset."""
    S = sorted(S)
    for size in range(len(S), -1, -1):
        for sub in combinations(S, size):
            if m.is_independent(sub):
                return size
    return 0


def gf2(vectors):
    return LinearMatroid(2, dict(enumerate(vectors)))


def parallel_instance():
    """n=2 over GF(3) with B_1 = B_2 as vectors: every element has a parallel twin."""
    vecs = {0: (1, 0), 1: (0, 1), 2: (1, 0), 3: (0, 1)}
    return ColouredInstance(2, LinearMatroid(3, vecs), [[0, 1], [2, 3]])


def k4():
    edges = {i: e for i, e in enumerate(combinations(range(4), 2))}
    return GraphicMatroid(4, edges)


@pytest.fixture
def rng():
    return random.Random(12345)


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def record(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append((number, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
