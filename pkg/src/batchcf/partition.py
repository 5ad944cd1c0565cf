"""User partitioning from shared responses, and cluster-level change detection.

The similarity test thresholds the same-response count between every user
pair; the induced graph is accepted only when it is a disjoint union of
cliques, otherwise all users are merged into one cluster.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Partition:
    """Disjoint nonempty clusters covering `universe`."""

    clusters: tuple[frozenset, ...]

    def __post_init__(self):
        seen: set = set()
        for c in self.clusters:
            if not c:
                raise ValueError("clusters must be nonempty")
            if seen & c:
                raise ValueError("clusters must be disjoint")
            seen |= c

    @property
    def universe(self) -> frozenset:
        return frozenset().union(*self.clusters) if self.clusters else frozenset()

    def cluster_of(self, u) -> frozenset:
        for c in self.clusters:
            if u in c:
                return c
        raise KeyError(f"user {u} not covered by partition")

    @staticmethod
    def from_sets(sets) -> "Partition":
        ordered = tuple(sorted((frozenset(s) for s in sets), key=min))
        return Partition(ordered)

    @staticmethod
    def single(users) -> "Partition":
        return Partition((frozenset(users),))


@dataclass(frozen=True)
class ResponseTable:
    """Responses of an ordered user subset to a shared ordered item list.

    Responses are +/-1; replay environments may additionally leave 0 where a
    rating is missing.
    """

    users: tuple
    items: tuple
    responses: np.ndarray  # (|users|, |items|) in {+1, 0, -1}

    def __post_init__(self):
        if len(set(self.users)) != len(self.users):
            raise ValueError("users must be distinct")
        if len(set(self.items)) != len(self.items):
            raise ValueError("items must be distinct")
        if self.responses.shape != (len(self.users), len(self.items)):
            raise ValueError("responses shape mismatch")
        if not np.isin(self.responses, (-1, 0, 1)).all():
            raise ValueError("responses must be in {-1, 0, +1}")


def same_response_count(row_u: np.ndarray, row_v: np.ndarray) -> int:
    """Number of coordinates where the two response rows agree."""
    row_u = np.asarray(row_u)
    row_v = np.asarray(row_v)
    if row_u.shape != row_v.shape:
        raise ValueError("rows must have equal length")
    return int((row_u == row_v).sum())


def _components(edges: np.ndarray) -> list[list[int]]:
    n = edges.shape[0]
    seen = np.zeros(n, dtype=bool)
    comps = []
    for s in range(n):
        if seen[s]:
            continue
        stack, comp = [s], []
        seen[s] = True
        while stack:
            x = stack.pop()
            comp.append(x)
            for y in np.flatnonzero(edges[x]):
                if not seen[y]:
                    seen[y] = True
                    stack.append(int(y))
        comps.append(sorted(comp))
    return comps


def _is_clique_union(edges: np.ndarray, comps: list[list[int]]) -> bool:
    for comp in comps:
        block = edges[np.ix_(comp, comp)]
        np.fill_diagonal(block, True)
        if not block.all():
            return False
    return True


def cosine_test(table: ResponseTable, lam: float) -> Partition:
    """Partition users by thresholded same-response counts.

    Edge u~v iff X_uv >= lam * L (lam * L kept as an exact real).  If the edge
    graph is a disjoint union of cliques its components are the clusters;
    otherwise all users fall into a single cluster.
    """
    n = len(table.users)
    length = len(table.items)
    if n < 1 or length < 1:
        raise ValueError("need at least one user and one test item")
    r = table.responses
    x = (r[:, None, :] == r[None, :, :]).sum(axis=-1)  # pairwise same-response counts
    edges = x >= lam * length
    np.fill_diagonal(edges, False)
    comps = _components(edges)
    if _is_clique_union(edges.copy(), comps):
        return Partition.from_sets([{table.users[i] for i in comp} for comp in comps])
    return Partition.single(table.users)


def validate_clique_union(users, edge_pred) -> bool:
    """True iff every connected component of (users, edge_pred) is complete."""
    users = sorted(users)
    n = len(users)
    edges = np.zeros((n, n), dtype=bool)
    for a in range(n):
        for b in range(a + 1, n):
            if edge_pred(users[a], users[b]):
                edges[a, b] = edges[b, a] = True
    return _is_clique_union(edges, _components(edges))


def detect_variation(p: Partition, p0: Partition) -> frozenset:
    """Users whose cluster moved between the reference partition p0 and p.

    Each cluster of p must map to the unique p0 cluster sharing at least half
    its users; if the map is ambiguous or not injective the conservative
    answer is the empty set.
    """
    if not p.universe <= p0.universe:
        raise ValueError("p's universe must be contained in p0's")
    mapping: dict[frozenset, frozenset] = {}
    used: set[frozenset] = set()
    for c in p.clusters:
        candidates = [c0 for c0 in p0.clusters if 2 * len(c & c0) >= len(c)]
        if len(candidates) != 1:
            return frozenset()
        target = candidates[0]
        if target in used:
            return frozenset()
        used.add(target)
        mapping[c] = target
    moved = set()
    for c in p.clusters:
        for u in c:
            if u not in mapping[c]:
                moved.add(u)
    return frozenset(moved)
