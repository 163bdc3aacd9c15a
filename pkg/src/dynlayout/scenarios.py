"""Event-stream generators for the demo workloads."""

from __future__ import annotations

import itertools
from typing import Callable, Optional, Sequence

import numpy as np

from .graph import ADD_EDGE, ADD_VERTEX, EditEvent


def scenario_cube(n: int, t: Optional[float] = 0.0) -> list[EditEvent]:
    """n x n x n lattice with 6-neighbour edges: n^3 vertices, 3 n^2 (n-1) edges."""
    if n < 1:
        raise ValueError("n must be >= 1")
    events = []
    vid = {}
    for k, (a, b, c) in enumerate(itertools.product(range(n), repeat=3)):
        vid[a, b, c] = k
        events.append(EditEvent(ADD_VERTEX, k, t=t))
    eid = 0
    for (a, b, c), u in vid.items():
        for da, db, dc in ((1, 0, 0), (0, 1, 0), (0, 0, 1)):
            w = vid.get((a + da, b + db, c + dc))
            if w is not None:
                events.append(EditEvent(ADD_EDGE, eid, u, w, t=t))
                eid += 1
    return events


def linear_schedule(duration: float, p_max: float = 1.0) -> Callable[[float], float]:
    """p(t) rising linearly from 0 to ``p_max`` over ``duration``."""
    return lambda t: min(p_max, p_max * t / duration)


def scenario_gnp(n: int, schedule: Callable[[float], float] = linear_schedule(100.0),
                 duration: float = 100.0, seed: int = 0, resolution: int = 10_000) -> list[EditEvent]:
    """Every pair gets a uniform trigger; an edge turns on at the first time
    p(t) exceeds its trigger. ``schedule`` must be non-decreasing on
    [0, duration], which is sampled at ``resolution`` points."""
    if n < 2:
        raise ValueError("n must be >= 2")
    rng = np.random.default_rng(seed)
    events = [EditEvent(ADD_VERTEX, v, t=0.0) for v in range(n)]
    iu, ju = np.triu_indices(n, 1)
    trig = rng.random(len(iu))
    ts = np.linspace(0.0, duration, resolution + 1)
    ps = np.maximum.accumulate(np.array([schedule(t) for t in ts]))
    first = np.searchsorted(ps, trig, side="right")
    on = first < len(ts)
    order = np.lexsort((np.arange(len(iu))[on], first[on]))
    idx = np.flatnonzero(on)[order]
    for eid, k in enumerate(idx):
        events.append(EditEvent(ADD_EDGE, eid, int(iu[k]), int(ju[k]), t=float(ts[first[k]])))
    return events


def gnp_triggers(n: int, p: float, seed: int = 0) -> list[tuple[int, int]]:
    """Edges of the trigger graph at a fixed p (same triggers as scenario_gnp)."""
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, 1)
    trig = rng.random(len(iu))
    keep = trig < p
    return list(zip(iu[keep].tolist(), ju[keep].tolist()))


def scenario_tree(count: int, keys: Optional[Sequence[float]] = None, seed: int = 0,
                  start_interval: float = 1.0, acceleration: float = 0.99) -> list[EditEvent]:
    """Binary-search-tree insertions with shrinking gaps between inserts.

    Each insert adds the new key's vertex and the edge to its tree parent.
    The gap before insert k is ``start_interval * acceleration**k``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if keys is None:
        keys = np.random.default_rng(seed).permutation(count * 4)[:count].tolist()
    if len(keys) != count or len(set(keys)) != count:
        raise ValueError("need `count` distinct keys")
    left: dict[int, int] = {}
    right: dict[int, int] = {}
    events: list[EditEvent] = []
    t = 0.0
    eid = 0
    for k, key in enumerate(keys):
        events.append(EditEvent(ADD_VERTEX, k, t=t))
        if k:
            node = 0
            while True:
                side = left if key < keys[node] else right
                nxt = side.get(node)
                if nxt is None:
                    side[node] = k
                    break
                node = nxt
            events.append(EditEvent(ADD_EDGE, eid, node, k, t=t, directed=True))
            eid += 1
        t += start_interval * acceleration ** k
    return events


class UnionFind:
    def __init__(self, n: int) -> None:
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> None:
        a, b = self.find(a), self.find(b)
        if a == b:
            return
        if self.size[a] < self.size[b]:
            a, b = b, a
        self.parent[b] = a
        self.size[a] += self.size[b]

    def largest(self) -> int:
        return max(self.size[self.find(x)] for x in range(len(self.parent))) if self.parent else 0


def largest_component(n: int, edges) -> int:
    uf = UnionFind(n)
    for u, v in edges:
        uf.union(u, v)
    return uf.largest()
