"""Matroid oracles, rank/span primitives and coloured instances.

Elements are plain integer ids.  Every oracle answers independence queries
through a :class:`SpanTester`, an incrementally grown independent set that
can also report whether further elements lie in its span.  The testers are
what the solvers use on their hot paths; ``rank``/``closure``/``augment``
are thin wrappers around them.

Parallel copies of an element (see :func:`build_instance`) share the
underlying vector, edge or uniform-matroid group, so any set holding two
copies is dependent without extra bookkeeping.
"""

from __future__ import annotations

import hashlib
from collections.abc import Iterable, Mapping, Sequence

import numpy as np

from .errors import ContractError, InstanceError, ParseError

DEFAULT_MAX_N = 64


class SpanTester:
    """An independent set grown one element at a time.

    ``add`` returns False (and leaves the set unchanged) when the element is
    already spanned, which is exactly the independence test for ``I + x``.
    """

    def __init__(self, matroid: "Matroid"):
        self.matroid = matroid
        self.members: list[int] = []

    @property
    def rank(self) -> int:
        return len(self.members)

    def add(self, x: int) -> bool:
        raise NotImplementedError

    def in_span(self, x: int) -> bool:
        raise NotImplementedError

    def in_span_many(self, xs: Sequence[int]) -> list[bool]:
        return [self.in_span(x) for x in xs]

    def circuit(self, x: int) -> list[int] | None:
        """Members y with ``members - y + x`` independent, or None if x is unspanned.

        For spanned non-member x this is the fundamental circuit minus x.
        """
        if not self.in_span(x):
            return None
        out = []
        for y in self.members:
            t = self.matroid.tester()
            for z in self.members:
                if z != y:
                    t.add(z)
            if t.add(x):
                out.append(y)
        return out

    def checkpoint(self):
        raise NotImplementedError

    def rollback(self, token) -> None:
        raise NotImplementedError


class Matroid:
    """Abstract independence oracle over a finite ground set of int ids."""

    kind = "abstract"

    def __init__(self, ground: Iterable[int]):
        self.ground = frozenset(ground)
        self._sorted_ground = sorted(self.ground)

    # subclasses implement these two
    def tester(self) -> SpanTester:
        raise NotImplementedError

    def relabel(self, origin: Mapping[int, int]) -> "Matroid":
        """Matroid on ``origin.keys()`` where each new id copies ``origin[id]``."""
        raise NotImplementedError

    def _check(self, xs: Iterable[int]) -> list[int]:
        xs = list(xs)
        for x in xs:
            if x not in self.ground:
                raise InstanceError(f"unknown element id {x!r}")
        return xs

    def tester_for(self, S: Iterable[int]) -> SpanTester:
        """A tester preloaded with a maximal independent subset of ``S``."""
        t = self.tester()
        for x in self._check(S):
            t.add(x)
        return t

    def is_independent(self, S: Iterable[int]) -> bool:
        xs = self._check(S)
        if len(set(xs)) != len(xs):
            return False
        t = self.tester()
        return all(t.add(x) for x in xs)

    def rank(self, S: Iterable[int]) -> int:
        t = self.tester()
        for x in sorted(set(self._check(S))):
            t.add(x)
        return t.rank

    def closure(self, S: Iterable[int]) -> frozenset[int]:
        t = self.tester_for(S)
        flags = t.in_span_many(self._sorted_ground)
        return frozenset(x for x, f in zip(self._sorted_ground, flags) if f)

    def augment(self, S: Iterable[int], T: Iterable[int]) -> frozenset[int]:
        """Independent ``S*`` with ``S <= S* <= S | T`` and ``|S*| >= |T|``."""
        S, T = set(self._check(S)), set(self._check(T))
        if not self.is_independent(S) or not self.is_independent(T):
            raise ContractError("augment requires independent inputs")
        t = self.tester_for(S)
        for y in sorted(T - S):
            t.add(y)
        return frozenset(t.members)

    def full_rank(self) -> int:
        return self.rank(self.ground)


# ---------------------------------------------------------------------------
# linear matroids over GF(p)


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    i = 2
    while i * i <= p:
        if p % i == 0:
            return False
        i += 1
    return True


class _LinearTester(SpanTester):
    # rows are kept in reduced row echelon form, so reducing a vector v is
    # the single product  v - v[pivots] @ rows  (mod p)
    def __init__(self, matroid: "LinearMatroid"):
        super().__init__(matroid)
        self.p = matroid.p
        self.rows = np.zeros((0, matroid.dim), dtype=np.int64)
        # coeff[i] expresses rows[i] as a combination of the members
        self.coeff = np.zeros((0, 0), dtype=np.int64)
        self.pivots: list[int] = []

    def _residual(self, v: np.ndarray) -> np.ndarray:
        if not self.pivots:
            return v % self.p
        return (v - v[self.pivots] @ self.rows) % self.p

    def add(self, x: int) -> bool:
        p = self.p
        v = self.matroid.vec(x)
        r = self._residual(v)
        nz = np.flatnonzero(r)
        if nz.size == 0:
            return False
        c = int(nz[0])
        inv = pow(int(r[c]), -1, p)
        r = (r * inv) % p
        k = len(self.members)
        cr = np.zeros(k + 1, dtype=np.int64)
        if k:
            cr[:k] = (-(v[self.pivots] @ self.coeff) * inv) % p
        cr[k] = inv
        coeff = np.zeros((k + 1, k + 1), dtype=np.int64)
        coeff[:k, :k] = self.coeff
        if k:
            col = self.rows[:, c].copy()
            self.rows = (self.rows - np.outer(col, r)) % p
            coeff[:k] = (coeff[:k] - np.outer(col, cr)) % p
        coeff[k] = cr
        self.coeff = coeff
        self.rows = np.vstack([self.rows, r])
        self.pivots.append(c)
        self.members.append(x)
        return True

    def circuit(self, x: int) -> list[int] | None:
        v = self.matroid.vec(x)
        if self._residual(v).any():
            return None
        if not self.pivots:
            return []
        lam = (v[self.pivots] @ self.coeff) % self.p
        return [y for y, a in zip(self.members, lam) if a]

    def in_span(self, x: int) -> bool:
        return not self._residual(self.matroid.vec(x)).any()

    def in_span_many(self, xs: Sequence[int]) -> list[bool]:
        if not xs:
            return []
        X = self.matroid.mat(xs)
        if self.pivots:
            X = (X - X[:, self.pivots] @ self.rows) % self.p
        else:
            X = X % self.p
        return (~X.any(axis=1)).tolist()

    def checkpoint(self):
        return (len(self.members), self.rows.copy(), self.coeff.copy())

    def rollback(self, token) -> None:
        k, rows, coeff = token
        del self.members[k:]
        del self.pivots[k:]
        self.rows = rows
        self.coeff = coeff


class LinearMatroid(Matroid):
    """Vectors over GF(p); independence is linear independence."""

    kind = "linear"

    def __init__(self, p: int, vectors: Mapping[int, Sequence[int]]):
        if not is_prime(p):
            raise InstanceError(f"field modulus {p} is not prime")
        super().__init__(vectors)
        self.p = p
        self.vectors = {x: tuple(int(a) % p for a in v) for x, v in vectors.items()}
        dims = {len(v) for v in self.vectors.values()}
        if len(dims) > 1:
            raise InstanceError("vectors of differing lengths")
        self.dim = dims.pop() if dims else 0
        self._index = {x: i for i, x in enumerate(self._sorted_ground)}
        self._matrix = np.array(
            [self.vectors[x] for x in self._sorted_ground], dtype=np.int64
        ).reshape(len(self._sorted_ground), self.dim)

    def vec(self, x: int) -> np.ndarray:
        return self._matrix[self._index[x]]

    def mat(self, xs: Sequence[int]) -> np.ndarray:
        return self._matrix[[self._index[x] for x in xs]]

    def tester(self) -> SpanTester:
        return _LinearTester(self)

    def relabel(self, origin: Mapping[int, int]) -> "LinearMatroid":
        return LinearMatroid(self.p, {new: self.vectors[old] for new, old in origin.items()})


# ---------------------------------------------------------------------------
# graphic matroids


class _GraphicTester(SpanTester):
    # union-find by size without path compression, so unions can be undone
    def __init__(self, matroid: "GraphicMatroid"):
        super().__init__(matroid)
        self.parent = list(range(matroid.vertices))
        self.size = [1] * matroid.vertices
        self.history: list[tuple[int, int]] = []

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            a = self.parent[a]
        return a

    def in_span(self, x: int) -> bool:
        u, v = self.matroid.edges[x]
        return self.find(u) == self.find(v)

    def add(self, x: int) -> bool:
        u, v = self.matroid.edges[x]
        a, b = self.find(u), self.find(v)
        if a == b:
            return False
        if self.size[a] < self.size[b]:
            a, b = b, a
        self.parent[b] = a
        self.size[a] += self.size[b]
        self.history.append((a, b))
        self.members.append(x)
        return True

    def circuit(self, x: int) -> list[int] | None:
        u, v = self.matroid.edges[x]
        if self.find(u) != self.find(v):
            return None
        if u == v:
            return []
        # path from u to v inside the forest formed by the members
        adj: dict[int, list[tuple[int, int]]] = {}
        for y in self.members:
            a, b = self.matroid.edges[y]
            adj.setdefault(a, []).append((b, y))
            adj.setdefault(b, []).append((a, y))
        prev: dict[int, tuple[int, int]] = {u: (u, -1)}
        stack = [u]
        while stack:
            a = stack.pop()
            if a == v:
                break
            for b, y in adj.get(a, ()):
                if b not in prev:
                    prev[b] = (a, y)
                    stack.append(b)
        path = []
        a = v
        while a != u:
            a, y = prev[a]
            path.append(y)
        return path

    def checkpoint(self):
        return len(self.members)

    def rollback(self, token) -> None:
        while len(self.members) > token:
            a, b = self.history.pop()
            self.parent[b] = b
            self.size[a] -= self.size[b]
            self.members.pop()


class GraphicMatroid(Matroid):
    """Edges of a multigraph on ``vertices`` vertices; forests are independent."""

    kind = "graphic"

    def __init__(self, vertices: int, edges: Mapping[int, tuple[int, int]]):
        super().__init__(edges)
        self.vertices = vertices
        self.edges = {x: (int(u), int(v)) for x, (u, v) in edges.items()}
        for x, (u, v) in self.edges.items():
            if not (0 <= u < vertices and 0 <= v < vertices):
                raise InstanceError(f"edge {x} = ({u},{v}) leaves the vertex range")

    def tester(self) -> SpanTester:
        return _GraphicTester(self)

    def relabel(self, origin: Mapping[int, int]) -> "GraphicMatroid":
        return GraphicMatroid(self.vertices, {new: self.edges[old] for new, old in origin.items()})


# ---------------------------------------------------------------------------
# uniform matroids with parallel classes


class _UniformTester(SpanTester):
    def __init__(self, matroid: "UniformMatroid"):
        super().__init__(matroid)
        self.groups: set = set()

    def in_span(self, x: int) -> bool:
        return self.matroid.group[x] in self.groups or len(self.groups) >= self.matroid.r

    def add(self, x: int) -> bool:
        if self.in_span(x):
            return False
        self.groups.add(self.matroid.group[x])
        self.members.append(x)
        return True

    def circuit(self, x: int) -> list[int] | None:
        g = self.matroid.group[x]
        if g in self.groups:
            return [y for y in self.members if self.matroid.group[y] == g]
        if len(self.groups) >= self.matroid.r:
            return list(self.members)
        return None

    def checkpoint(self):
        return len(self.members)

    def rollback(self, token) -> None:
        while len(self.members) > token:
            x = self.members.pop()
            self.groups.discard(self.matroid.group[x])


class UniformMatroid(Matroid):
    """U(r, m) where elements sharing a ``group`` label are parallel."""

    kind = "uniform"

    def __init__(self, r: int, ground: Iterable[int], group: Mapping[int, object] | None = None):
        super().__init__(ground)
        self.r = r
        self.group = dict(group) if group is not None else {x: x for x in self.ground}

    def tester(self) -> SpanTester:
        return _UniformTester(self)

    def relabel(self, origin: Mapping[int, int]) -> "UniformMatroid":
        return UniformMatroid(self.r, origin.keys(), {new: self.group[old] for new, old in origin.items()})


# ---------------------------------------------------------------------------
# coloured instances


class ColouredInstance:
    """Rank-``n`` matroid whose ground set is split into ``n`` disjoint bases.

    ``classes[c - 1]`` is the colour class ``B_c``; colours run over ``1..n``.
    """

    def __init__(
        self,
        n: int,
        matroid: Matroid,
        classes: Sequence[Iterable[int]],
        origin: Mapping[int, int] | None = None,
        max_n: int = DEFAULT_MAX_N,
        validate: bool = True,
    ):
        self.n = n
        self.matroid = matroid
        self.classes = tuple(frozenset(B) for B in classes)
        self.origin = dict(origin) if origin is not None else None
        self.colour: dict[int, int] = {}
        for c, B in enumerate(self.classes, start=1):
            for x in B:
                if x in self.colour:
                    raise InstanceError(f"element {x} lies in classes {self.colour[x]} and {c}")
                self.colour[x] = c
        self.ground = frozenset(self.colour)
        self.sorted_ground = sorted(self.ground)
        if validate:
            self._validate(max_n)

    def _validate(self, max_n: int) -> None:
        n = self.n
        if n < 1:
            raise InstanceError("rank must be positive")
        if n > max_n:
            raise InstanceError(f"n={n} exceeds the configured cap {max_n}")
        if len(self.classes) != n:
            raise InstanceError(f"expected {n} colour classes, got {len(self.classes)}")
        if self.ground != self.matroid.ground:
            raise InstanceError("colour classes must cover exactly the matroid ground set")
        bad = [
            c
            for c, B in enumerate(self.classes, start=1)
            if len(B) != n or not self.matroid.is_independent(B)
        ]
        if bad:
            raise InstanceError(f"colour classes {bad} are not bases of size {n}")
        if self.matroid.full_rank() != n:
            raise InstanceError(f"matroid rank differs from n={n}")

    def B(self, c: int) -> frozenset[int]:
        return self.classes[c - 1]

    def colours(self, S: Iterable[int]) -> set[int]:
        return {self.colour[x] for x in S}

    def is_rainbow(self, S: Iterable[int]) -> bool:
        S = list(S)
        return len({self.colour[x] for x in S}) == len(S)

    def is_rainbow_independent(self, S: Iterable[int]) -> bool:
        S = list(S)
        return self.is_rainbow(S) and self.matroid.is_independent(S)

    def is_transversal_basis(self, S: Iterable[int]) -> bool:
        S = list(S)
        return len(S) == self.n and self.is_rainbow_independent(S)

    def __repr__(self) -> str:
        return f"ColouredInstance(n={self.n}, kind={self.matroid.kind})"


def build_instance(
    m: Matroid, raw_bases: Sequence[Iterable[int]], max_n: int = DEFAULT_MAX_N
) -> ColouredInstance:
    """Colour ``n`` bases of ``m``, duplicating elements shared between bases.

    An element lying in k >= 2 of the bases becomes k fresh parallel copies,
    one per basis.  Fresh ids are assigned class by class in ascending order
    of the original ids; ``inst.origin`` maps each fresh id back.
    """
    raw = [frozenset(m._check(B)) for B in raw_bases]
    n = len(raw)
    rk = m.full_rank()
    bad = [c for c, B in enumerate(raw, start=1) if len(B) != rk or not m.is_independent(B)]
    if bad:
        raise InstanceError(f"raw classes {bad} are not bases of the matroid")
    if rk != n:
        raise InstanceError(f"got {n} bases of a rank-{rk} matroid")
    origin: dict[int, int] = {}
    classes = []
    nxt = 0
    for B in raw:
        cls = []
        for x in sorted(B):
            origin[nxt] = x
            cls.append(nxt)
            nxt += 1
        classes.append(cls)
    return ColouredInstance(n, m.relabel(origin), classes, origin=origin, max_n=max_n)


# ---------------------------------------------------------------------------
# instance text format

HEADER = "rota-instance v1"


def _kv(tokens: Sequence[str], lineno: int) -> dict[str, str]:
    out = {}
    for tok in tokens:
        if "=" not in tok:
            raise ParseError(f"expected key=value, got {tok!r}", lineno)
        k, v = tok.split("=", 1)
        out[k] = v
    return out


def _int(s: str, what: str, lineno: int) -> int:
    try:
        return int(s)
    except ValueError:
        raise ParseError(f"{what} must be an integer, got {s!r}", lineno) from None


def parse_instance(text: str, max_n: int = DEFAULT_MAX_N) -> ColouredInstance:
    lines = [(i, ln.strip()) for i, ln in enumerate(text.splitlines(), start=1)]
    lines = [(i, ln) for i, ln in lines if ln and not ln.startswith("#")]
    if not lines or lines[0][1] != HEADER:
        raise ParseError(f"first line must be {HEADER!r}", lines[0][0] if lines else 1)
    if len(lines) < 2:
        raise ParseError("missing kind line", 2)
    lineno, kind_line = lines[1]
    toks = kind_line.split()
    if len(toks) < 2 or toks[0] != "kind" or toks[1] not in ("linear", "graphic"):
        raise ParseError("expected 'kind linear ...' or 'kind graphic ...'", lineno)
    kind = toks[1]
    params = _kv(toks[2:], lineno)
    if "n" not in params:
        raise ParseError("kind line lacks n=", lineno)
    n = _int(params["n"], "n", lineno)
    if kind == "linear":
        if "p" not in params:
            raise ParseError("linear kind line lacks p=", lineno)
        p = _int(params["p"], "p", lineno)
        if not is_prime(p):
            raise ParseError(f"p={p} is not prime", lineno)
    else:
        if "v" not in params:
            raise ParseError("graphic kind line lacks v=", lineno)
        nv = _int(params["v"], "v", lineno)

    payload: dict[int, object] = {}
    colour: dict[int, int] = {}
    for lineno, ln in lines[2:]:
        toks = ln.split()
        if toks[0] != "elem" or len(toks) != 4:
            raise ParseError("expected 'elem <id> colour=<c> vec=...|edge=...'", lineno)
        x = _int(toks[1], "element id", lineno)
        if x in payload:
            raise ParseError(f"duplicate element id {x}", lineno)
        kv = _kv(toks[2:], lineno)
        if "colour" not in kv:
            raise ParseError("missing colour=", lineno)
        c = _int(kv["colour"], "colour", lineno)
        if not 1 <= c <= n:
            raise ParseError(f"colour {c} outside 1..{n}", lineno)
        if kind == "linear":
            if "vec" not in kv:
                raise ParseError("missing vec=", lineno)
            vec = [_int(a, "vector entry", lineno) for a in kv["vec"].split(",")]
            if len(vec) != n:
                raise ParseError(f"vector has {len(vec)} entries, expected {n}", lineno)
            payload[x] = tuple(a % p for a in vec)
        else:
            if "edge" not in kv:
                raise ParseError("missing edge=", lineno)
            ends = kv["edge"].split(",")
            if len(ends) != 2:
                raise ParseError("edge needs two endpoints", lineno)
            u, v = (_int(a, "vertex", lineno) for a in ends)
            if not (0 <= u < nv and 0 <= v < nv):
                raise ParseError(f"edge endpoint outside 0..{nv - 1}", lineno)
            payload[x] = (u, v)
        colour[x] = c

    classes: list[list[int]] = [[] for _ in range(n)]
    for x, c in colour.items():
        classes[c - 1].append(x)
    wrong = [c for c, B in enumerate(classes, start=1) if len(B) != n]
    if wrong:
        raise ParseError(f"colours {wrong} do not have exactly n={n} elements", lines[-1][0])
    m: Matroid = LinearMatroid(p, payload) if kind == "linear" else GraphicMatroid(nv, payload)
    try:
        return ColouredInstance(n, m, classes, max_n=max_n)
    except InstanceError as exc:
        raise ParseError(str(exc)) from exc


def format_instance(inst: ColouredInstance) -> str:
    m = inst.matroid
    out = [HEADER]
    if isinstance(m, LinearMatroid):
        out.append(f"kind linear p={m.p} n={inst.n}")
        for x in inst.sorted_ground:
            vec = ",".join(str(a) for a in m.vectors[x])
            out.append(f"elem {x} colour={inst.colour[x]} vec={vec}")
    elif isinstance(m, GraphicMatroid):
        out.append(f"kind graphic v={m.vertices} n={inst.n}")
        for x in inst.sorted_ground:
            u, v = m.edges[x]
            out.append(f"elem {x} colour={inst.colour[x]} edge={u},{v}")
    else:
        raise InstanceError(f"{m.kind} matroids have no text serialization")
    return "\n".join(out) + "\n"


def instance_digest(inst: ColouredInstance) -> str:
    return hashlib.sha256(format_instance(inst).encode("utf-8")).hexdigest()


def load_instance(path, max_n: int = DEFAULT_MAX_N) -> ColouredInstance:
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh.read(), max_n=max_n)


def save_instance(inst: ColouredInstance, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_instance(inst))


# module-level conveniences mirroring the oracle surface


def is_independent(m: Matroid, S: Iterable[int]) -> bool:
    return m.is_independent(S)


def rank(m: Matroid, S: Iterable[int]) -> int:
    return m.rank(S)


def closure(m: Matroid, S: Iterable[int]) -> frozenset[int]:
    return m.closure(S)


def augment(m: Matroid, S: Iterable[int], T: Iterable[int]) -> frozenset[int]:
    return m.augment(S, T)


def same_span(m: Matroid, A: Iterable[int], B: Iterable[int]) -> bool:
    """spn(A) == spn(B), decided by three rank queries."""
    A, B = set(A), set(B)
    ra = m.rank(A)
    return ra == m.rank(B) == m.rank(A | B)
