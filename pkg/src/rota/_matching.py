"""Maximum bipartite matching by augmenting paths (Kuhn's algorithm).

The exchange graphs built here have at most n^2 edges with n <= 64, so the
simple O(VE) method is plenty and keeps the result deterministic: left
vertices are tried in the given order and their neighbours in list order.
"""

from __future__ import annotations

from collections.abc import Hashable, Mapping, Sequence


def max_matching(
    adj: Mapping[Hashable, Sequence[Hashable]], left_order: Sequence[Hashable] | None = None
) -> dict:
    """Return a maximum matching as a dict left -> right."""
    left = list(left_order) if left_order is not None else list(adj)
    match_r: dict = {}

    def try_augment(u, seen: set) -> bool:
        # iterative DFS would be safer for huge graphs; depth here is <= n
        for v in adj.get(u, ()):
            if v in seen:
                continue
            seen.add(v)
            w = match_r.get(v)
            if w is None or try_augment(w, seen):
                match_r[v] = u
                return True
        return False

    for u in left:
        try_augment(u, set())
    return {u: v for v, u in match_r.items()}
