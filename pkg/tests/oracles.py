"""Independent oracles used to compute expected values.

These deliberately avoid the library's code paths: walk scores come
from memoised depth-first enumeration over explicit edge lists,
conductance from direct edge counting, and the modularity optimum from
exhaustive partition search. Keep them slow and obvious.
"""

from __future__ import annotations

from collections import defaultdict
from functools import lru_cache
from typing import Iterable, Sequence


def walk_broadcast(day_edges: Sequence[Iterable[tuple[int, int]]],
                   n: int, alpha: float, k: int) -> list[float]:
    """Sum over time-respecting walks from each node of alpha^length,
    with at most k hops per day. The empty walk counts 1."""
    T = len(day_edges)
    adj = []
    for edges in day_edges:
        out = defaultdict(list)
        for u, v in edges:
            out[u].append(v)
        adj.append(out)

    @lru_cache(maxsize=None)
    def weight(u: int, t: int, h: int) -> float:
        # stopping contributes 1 exactly once, on the last day
        total = 1.0 if t == T - 1 else weight(u, t + 1, 0)
        if h < k:
            for v in adj[t][u]:
                total += alpha * weight(v, t, h + 1)
        return total

    result = [weight(u, 0, 0) for u in range(n)]
    weight.cache_clear()
    return result


def walk_receive(day_edges: Sequence[Iterable[tuple[int, int]]],
                 n: int, alpha: float, k: int) -> list[float]:
    """Walks ending at each node: every walk u->v over (A_1..A_T)
    corresponds one-to-one to a walk v->u over the reversed sequence of
    transposed snapshots, with identical length."""
    reversed_transposed = [[(v, u) for u, v in edges]
                           for edges in reversed(list(day_edges))]
    return walk_broadcast(reversed_transposed, n, alpha, k)


def brute_conductance(edges: dict[tuple[str, str], int],
                      nodes: Iterable[str],
                      members: set[str],
                      weighted: bool) -> float:
    """Direct edge counting; vol counts each incident edge endpoint."""
    cut = 0.0
    vol = {u: 0.0 for u in nodes}
    for (a, b), w in edges.items():
        value = float(w) if weighted else 1.0
        vol[a] += value
        vol[b] += value
        if (a in members) != (b in members):
            cut += value
    vol_in = sum(v for u, v in vol.items() if u in members)
    vol_out = sum(v for u, v in vol.items() if u not in members)
    denom = min(vol_in, vol_out)
    if denom == 0:
        return 1.0
    return cut / denom


def set_partitions(items: Sequence):
    """All partitions of a sequence (Bell-number many; keep inputs small)."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for partition in set_partitions(rest):
        for i, block in enumerate(partition):
            yield partition[:i] + [block + [first]] + partition[i + 1:]
        yield partition + [[first]]


def modularity(edges: set[tuple[str, str]], nodes: Sequence[str],
               partition: Sequence[Iterable[str]]) -> float:
    """Newman modularity of an unweighted undirected partition."""
    m = len(edges)
    if m == 0:
        return 0.0
    degree = {u: 0 for u in nodes}
    for a, b in edges:
        degree[a] += 1
        degree[b] += 1
    q = 0.0
    for block in partition:
        block = set(block)
        intra = sum(1 for a, b in edges if a in block and b in block)
        dc = sum(degree[u] for u in block)
        q += intra / m - (dc / (2 * m)) ** 2
    return q


def best_modularity_partition(edges: set[tuple[str, str]],
                              nodes: Sequence[str]):
    """Exhaustive maximum-modularity partition (n <= 10 or so)."""
    best_q, best = float("-inf"), None
    for partition in set_partitions(list(nodes)):
        q = modularity(edges, nodes, partition)
        if q > best_q:
            best_q, best = q, [sorted(block) for block in partition]
    return best_q, sorted(best)
