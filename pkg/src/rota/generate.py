"""Seeded random instances.

Linear instances take n uniformly random invertible n x n matrices over
GF(p) (rejection sampling); their rows are the colour classes.  Graphic
instances take n uniformly random spanning trees of K_{n+1}, decoded from
random Pruefer sequences, as the classes of a multigraph.
"""

from __future__ import annotations

import heapq
import random

import numpy as np

from .core import DEFAULT_MAX_N, ColouredInstance, GraphicMatroid, LinearMatroid, is_prime
from .errors import InstanceError


def _rank_mod_p(rows: list[list[int]], p: int) -> int:
    A = np.array(rows, dtype=np.int64) % p
    r = 0
    nrows, ncols = A.shape
    for c in range(ncols):
        piv = next((i for i in range(r, nrows) if A[i, c]), None)
        if piv is None:
            continue
        A[[r, piv]] = A[[piv, r]]
        A[r] = (A[r] * pow(int(A[r, c]), -1, p)) % p
        for i in range(nrows):
            if i != r and A[i, c]:
                A[i] = (A[i] - A[i, c] * A[r]) % p
        r += 1
    return r


def random_invertible(n: int, p: int, rng: random.Random) -> list[list[int]]:
    while True:
        rows = [[rng.randrange(p) for _ in range(n)] for _ in range(n)]
        if _rank_mod_p(rows, p) == n:
            return rows


def random_linear_instance(n: int, p: int, seed: int, max_n: int = DEFAULT_MAX_N) -> ColouredInstance:
    if not is_prime(p):
        raise InstanceError(f"p={p} is not prime")
    if n < 1:
        raise InstanceError("n must be positive")
    rng = random.Random(seed)
    vectors = {}
    classes = []
    for _ in range(n):
        cls = []
        for row in random_invertible(n, p, rng):
            x = len(vectors)
            vectors[x] = tuple(row)
            cls.append(x)
        classes.append(cls)
    return ColouredInstance(n, LinearMatroid(p, vectors), classes, max_n=max_n)


def pruefer_tree(vertices: int, rng: random.Random) -> list[tuple[int, int]]:
    """Edges of a uniformly random labelled tree on ``vertices`` vertices."""
    if vertices == 1:
        return []
    if vertices == 2:
        return [(0, 1)]
    seq = [rng.randrange(vertices) for _ in range(vertices - 2)]
    degree = [1] * vertices
    for a in seq:
        degree[a] += 1
    leaves = [v for v in range(vertices) if degree[v] == 1]
    heapq.heapify(leaves)
    edges = []
    for a in seq:
        leaf = heapq.heappop(leaves)
        edges.append((min(leaf, a), max(leaf, a)))
        degree[a] -= 1
        if degree[a] == 1:
            heapq.heappush(leaves, a)
    u, v = heapq.heappop(leaves), heapq.heappop(leaves)
    edges.append((u, v))
    return edges


def random_graphic_instance(
    n: int, seed: int, vertices: int | None = None, max_n: int = DEFAULT_MAX_N
) -> ColouredInstance:
    v = n + 1 if vertices is None else vertices
    if n < 1 or v != n + 1:
        raise InstanceError(f"a rank-{n} connected graphic instance needs v = {n + 1} vertices")
    rng = random.Random(seed)
    edges = {}
    classes = []
    for _ in range(n):
        cls = []
        for e in pruefer_tree(v, rng):
            x = len(edges)
            edges[x] = e
            cls.append(x)
        classes.append(cls)
    return ColouredInstance(n, GraphicMatroid(v, edges), classes, max_n=max_n)


def generate(kind: str, n: int, seed: int, p: int | None = None, vertices: int | None = None,
             max_n: int = DEFAULT_MAX_N) -> ColouredInstance:
    if kind == "linear":
        if p is None:
            raise InstanceError("linear instances need p")
        return random_linear_instance(n, p, seed, max_n=max_n)
    if kind == "graphic":
        return random_graphic_instance(n, seed, vertices, max_n=max_n)
    raise InstanceError(f"unknown kind {kind!r}")
