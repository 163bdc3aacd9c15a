"""Dynamic coarsening by priority-greedy maximal matching.

Each :class:`Coarsener` maintains, for one finer graph, the unique matching
obtained by scanning edges from highest to lowest priority and keeping every
edge that does not touch an already-kept edge, together with the coarse
graph that results from contracting the matched edges. Edits to the finer
graph are absorbed by change propagation over the match equations:

    m(e) = AND over adjacent e' with higher priority of (not m(e'))

Edges are re-evaluated highest priority first, so every edge is evaluated
at most once per propagation. For bounded degree graphs the expected number
of re-evaluations per edit does not depend on the size of the graph.

A :class:`LevelChain` stacks coarseners so that the coarse edits produced at
one level drive the next.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .graph import ADD_EDGE, ADD_VERTEX, REMOVE_EDGE, REMOVE_VERTEX, BaseGraph, EditEvent, GraphError

MASK64 = (1 << 64) - 1
Key = tuple[int, int]


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def edge_hash(key: Key, seed: int) -> int:
    h = splitmix64((seed & MASK64) ^ splitmix64(key[0] & MASK64))
    return splitmix64(h ^ (key[1] & MASK64))


def priority(key: Key, seed: int) -> float:
    """Priority in [0, 1) of the edge with canonical key ``(u, v)``, u < v."""
    return edge_hash(key, seed) / 2.0**64


def level_seed(root_seed: int, level: int) -> int:
    return splitmix64((root_seed & MASK64) ^ splitmix64(0xC0A45E + level))


def canonical(u: int, v: int) -> Key:
    return (u, v) if u < v else (v, u)


def make_order(seed: int = 0, priorities: Optional[dict[Key, float]] = None) -> Callable[[Key], tuple]:
    """Sort key with the highest-priority edge first; ties broken by edge key.

    ``priorities`` injects explicit priority values (larger wins), which is
    how hand-built examples fix an order.
    """
    if priorities is not None:
        table = {canonical(*k): p for k, p in priorities.items()}
        return lambda key: (-table[key], key)
    return lambda key: (-edge_hash(key, seed), key)


@dataclass(frozen=True)
class CoarseEdit:
    """Edit of a coarse graph. Edge edits carry a multiplicity delta."""

    op: str
    u: int
    v: Optional[int] = None
    count: int = 0


@dataclass
class UpdateStats:
    reevals: list[int] = field(default_factory=list)
    queue_ops: list[int] = field(default_factory=list)

    def summary(self) -> dict:
        if not self.reevals:
            return {"updates": 0}
        r = np.asarray(self.reevals, dtype=float)
        q = np.asarray(self.queue_ops, dtype=float)
        return {
            "updates": int(r.size),
            "reevals_mean": float(r.mean()),
            "reevals_p50": float(np.percentile(r, 50)),
            "reevals_p90": float(np.percentile(r, 90)),
            "reevals_p99": float(np.percentile(r, 99)),
            "reevals_max": int(r.max()),
            "queue_ops_mean": float(q.mean()),
        }


class Coarsener:
    """Maintains the greedy matching of a finer graph and its contraction.

    The finer graph is a multigraph given by edge multiplicities; only the
    presence of a vertex pair matters to the matching, while multiplicities
    are summed into the coarse edge counts. Vertex ids of the finer graph
    are supplied by the caller; coarse vertex ids are allocated here and are
    never reused.
    """

    def __init__(self, seed: int = 0, order: Optional[Callable[[Key], tuple]] = None,
                 instrument: bool = False) -> None:
        self.order = order if order is not None else make_order(seed)
        self.fadj: dict[int, dict[int, int]] = {}
        self.partner: dict[int, int] = {}
        self.image: dict[int, int] = {}
        self.members: dict[int, tuple[int, ...]] = {}
        self.cadj: dict[int, dict[int, int]] = {}
        self.instrument = instrument
        self.stats = UpdateStats()
        self._okey: dict[Key, tuple] = {}
        self._heap: list[tuple] = []
        self._queued: set[Key] = set()
        self._next_id = 0
        self._vout: dict[int, int] = {}
        self._eout: dict[Key, int] = {}
        self._reevals = 0
        self._qops = 0

    # ------------------------------------------------------------------ queries

    def okey(self, key: Key) -> tuple:
        k = self._okey.get(key)
        if k is None:
            k = self._okey[key] = self.order(key)
        return k

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.fadj.get(u, ())

    def is_matched(self, u: int, v: int) -> bool:
        return self.partner.get(u) == v

    def matching(self) -> set[Key]:
        return {canonical(u, v) for u, v in self.partner.items() if u < v}

    def fine_edges(self) -> dict[Key, int]:
        return {(u, v): c for u, nb in self.fadj.items() for v, c in nb.items() if u < v}

    def coarse_edges(self) -> dict[Key, int]:
        return {(a, b): c for a, nb in self.cadj.items() for b, c in nb.items() if a < b}

    def evaluate(self, u: int, v: int) -> bool:
        """Match equation of edge (u, v): True iff no higher-priority
        adjacent edge is matched."""
        k = self.okey(canonical(u, v))
        for w in (u, v):
            p = self.partner.get(w)
            if p is None:
                continue
            other = canonical(w, p)
            if other != canonical(u, v) and self.okey(other) < k:
                return False
        return True

    # ----------------------------------------------------------- fine-level edits

    def add_vertex(self, v: int) -> None:
        if v in self.fadj:
            raise GraphError(f"vertex {v} already present")
        self.fadj[v] = {}
        self._attach([self._new_coarse((v,))])

    def remove_vertex(self, v: int) -> None:
        if v not in self.fadj:
            raise GraphError(f"unknown vertex {v}")
        if self.fadj[v]:
            raise GraphError(f"vertex {v} still has incident edges")
        self._retire(self.image.pop(v))
        del self.fadj[v]

    def change_edge(self, u: int, v: int, delta: int) -> None:
        """Add ``delta`` (possibly negative) to the multiplicity of (u, v)."""
        if u == v:
            raise GraphError(f"self-loop on vertex {u}")
        for w in (u, v):
            if w not in self.fadj:
                raise GraphError(f"unknown vertex {w}")
        old = self.fadj[u].get(v, 0)
        new = old + delta
        if new < 0:
            raise GraphError(f"edge ({u}, {v}) multiplicity would become {new}")
        if delta == 0:
            return
        if new > 0:
            self.fadj[u][v] = self.fadj[v][u] = new
            if self.image[u] != self.image[v]:
                self._bump(self.image[u], self.image[v], delta)
            if old == 0:
                self._push(canonical(u, v))
            return
        # edge disappears
        key = canonical(u, v)
        del self.fadj[u][v]
        del self.fadj[v][u]
        if self.partner.get(u) == v:
            self._unmatch(u, v, key)
        else:
            self._bump(self.image[u], self.image[v], delta)
            self._push_dependents(u, v, key)
        self._okey.pop(key, None)

    def apply(self, edits: Iterable[CoarseEdit]) -> list[CoarseEdit]:
        """Apply finer-level edits, propagate to quiescence, return the net
        coarse edits."""
        self._reevals = self._qops = 0
        for ed in edits:
            if ed.op == ADD_VERTEX:
                self.add_vertex(ed.u)
            elif ed.op == REMOVE_VERTEX:
                self.remove_vertex(ed.u)
            elif ed.op == ADD_EDGE:
                self.change_edge(ed.u, ed.v, ed.count)
            elif ed.op == REMOVE_EDGE:
                self.change_edge(ed.u, ed.v, -ed.count)
            else:
                raise GraphError(f"unknown op {ed.op!r}")
        self.propagate()
        if self.instrument:
            self.stats.reevals.append(self._reevals)
            self.stats.queue_ops.append(self._qops)
        return self.flush()

    # --------------------------------------------------------------- propagation

    def propagate(self) -> None:
        heap = self._heap
        while heap:
            _, key = heapq.heappop(heap)
            self._qops += 1
            self._queued.discard(key)
            u, v = key
            if v not in self.fadj.get(u, ()):
                continue  # stale entry for a deleted edge
            self._reevals += 1
            want = self.evaluate(u, v)
            if want != (self.partner.get(u) == v):
                if want:
                    self._match(u, v, key)
                else:
                    self._unmatch(u, v, key)

    def _push(self, key: Key) -> None:
        if key in self._queued:
            return
        self._queued.add(key)
        self._qops += 1
        heapq.heappush(self._heap, (self.okey(key), key))

    def _push_dependents(self, u: int, v: int, key: Key) -> None:
        k = self.okey(key)
        for w in (u, v):
            for x in self.fadj[w]:
                other = canonical(w, x)
                if other != key and k < self.okey(other):
                    self._push(other)

    def _match(self, u: int, v: int, key: Key) -> None:
        for w in (u, v):
            p = self.partner.get(w)
            if p is not None:
                other = canonical(w, p)
                if not self.okey(key) < self.okey(other):
                    raise AssertionError(f"match{key}: dominated by matched edge {other}")
                self._unmatch(w, p, other)
        self.partner[u] = v
        self.partner[v] = u
        self._retire(self.image[u])
        self._retire(self.image[v])
        self._attach([self._new_coarse((u, v) if u < v else (v, u))])
        self._push_dependents(u, v, key)

    def _unmatch(self, u: int, v: int, key: Key) -> None:
        if self.partner.get(u) != v:
            raise AssertionError(f"unmatch{key}: edge is not matched")
        del self.partner[u]
        del self.partner[v]
        self._retire(self.image[u])
        self._attach([self._new_coarse((u,)), self._new_coarse((v,))])
        self._push_dependents(u, v, key)

    # -------------------------------------------------------------- coarse graph

    def _new_coarse(self, members: tuple[int, ...]) -> int:
        c = self._next_id
        self._next_id += 1
        self.members[c] = members
        for w in members:
            self.image[w] = c
        return c

    def _attach(self, created: list[int]) -> None:
        new = set(created)
        for c in created:
            self.cadj[c] = {}
            self._vout[c] = self._vout.get(c, 0) + 1
        for c in created:
            for w in self.members[c]:
                for x, cnt in self.fadj[w].items():
                    d = self.image[x]
                    if d == c or (d in new and d < c):
                        continue
                    self._bump(c, d, cnt)

    def _retire(self, c: int) -> None:
        for d, cnt in self.cadj.pop(c).items():
            del self.cadj[d][c]
            self._record_edge(c, d, -cnt)
        del self.members[c]
        self._vout[c] = self._vout.get(c, 0) - 1

    def _bump(self, a: int, b: int, delta: int) -> None:
        na = self.cadj[a]
        cnt = na.get(b, 0) + delta
        if cnt < 0:
            raise AssertionError(f"coarse edge ({a}, {b}) count went negative")
        if cnt == 0:
            del na[b]
            del self.cadj[b][a]
        else:
            na[b] = cnt
            self.cadj[b][a] = cnt
        self._record_edge(a, b, delta)

    def _record_edge(self, a: int, b: int, delta: int) -> None:
        key = canonical(a, b)
        self._eout[key] = self._eout.get(key, 0) + delta

    def flush(self) -> list[CoarseEdit]:
        """Net coarse edits since the last flush, removals first."""
        out: list[CoarseEdit] = []
        for (a, b), d in self._eout.items():
            if d < 0:
                out.append(CoarseEdit(REMOVE_EDGE, a, b, -d))
        for c, d in self._vout.items():
            if d < 0:
                out.append(CoarseEdit(REMOVE_VERTEX, c))
        for c, d in self._vout.items():
            if d > 0:
                out.append(CoarseEdit(ADD_VERTEX, c))
        for (a, b), d in self._eout.items():
            if d > 0:
                out.append(CoarseEdit(ADD_EDGE, a, b, d))
        self._eout = {}
        self._vout = {}
        return out

    # ------------------------------------------------------------------ checking

    def check(self) -> None:
        """Raise AssertionError if any structural invariant is broken."""
        for u, p in self.partner.items():
            assert self.partner.get(p) == u, "partner map not symmetric"
            assert self.has_edge(u, p), "matched edge missing"
        for (u, v) in self.fine_edges():
            assert self.evaluate(u, v) == self.is_matched(u, v), f"match equation fails at {(u, v)}"
        seen: set[int] = set()
        for c, mem in self.members.items():
            assert not seen.intersection(mem), "coarse vertices overlap"
            seen.update(mem)
            assert all(self.image[w] == c for w in mem)
            if len(mem) == 2:
                assert self.is_matched(*mem)
            else:
                assert mem[0] not in self.partner
        assert seen == set(self.fadj), "partition does not cover the finer graph"
        recount: dict[Key, int] = {}
        for (u, v), cnt in self.fine_edges().items():
            a, b = self.image[u], self.image[v]
            if a != b:
                k = canonical(a, b)
                recount[k] = recount.get(k, 0) + cnt
        assert recount == self.coarse_edges(), "coarse edge counts disagree with recount"

    def describe(self) -> "MatchResult":
        parts = {c: frozenset(m) for c, m in self.members.items()}
        edges = {frozenset((parts[a], parts[b])): c for (a, b), c in self.coarse_edges().items()}
        return MatchResult(self.matching(), frozenset(parts.values()), edges)


@dataclass(frozen=True)
class MatchResult:
    """Matching plus its contraction, with coarse vertices named by their
    member sets so results from different runs compare directly."""

    matching: set[Key]
    partition: frozenset
    coarse_edges: dict


def static_greedy_matching(vertices: Iterable[int], edges, seed: int = 0,
                           order: Optional[Callable[[Key], tuple]] = None) -> MatchResult:
    """From-scratch greedy matching in priority order (test oracle).

    ``edges`` is an iterable of pairs or a mapping pair -> multiplicity.
    """
    order = order if order is not None else make_order(seed)
    counts = dict(edges) if isinstance(edges, dict) else {canonical(*e): 1 for e in edges}
    counts = {canonical(*k): c for k, c in counts.items()}
    used: set[int] = set()
    matching: set[Key] = set()
    for key in sorted(counts, key=order):
        u, v = key
        if u not in used and v not in used:
            matching.add(key)
            used.update(key)
    block: dict[int, frozenset] = {}
    for u, v in matching:
        block[u] = block[v] = frozenset((u, v))
    for w in vertices:
        block.setdefault(w, frozenset((w,)))
    coarse: dict = {}
    for (u, v), c in counts.items():
        a, b = block[u], block[v]
        if a != b:
            k = frozenset((a, b))
            coarse[k] = coarse.get(k, 0) + c
    return MatchResult(matching, frozenset(block.values()), coarse)


class LevelChain:
    """Base graph plus ``levels - 1`` coarse graphs kept in sync.

    Level 0 is the base graph; level ``l + 1`` is the contraction of level
    ``l`` maintained by ``coarseners[l]``.
    """

    def __init__(self, levels: int = 3, seed: int = 0, instrument: bool = False,
                 orders: Optional[list] = None) -> None:
        if levels < 1:
            raise ValueError("levels must be >= 1")
        self.levels = levels
        self.seed = seed
        self.graph = BaseGraph()
        self.coarseners = [
            Coarsener(level_seed(seed, l), order=orders[l] if orders else None, instrument=instrument)
            for l in range(levels - 1)
        ]
        self._pending: list[CoarseEdit] = []
        self.graph.subscribe(self._on_base_event)

    def _on_base_event(self, ev: EditEvent) -> None:
        if ev.op in (ADD_VERTEX, REMOVE_VERTEX):
            self._pending.append(CoarseEdit(ev.op, ev.id))
        else:
            self._pending.append(CoarseEdit(ev.op, ev.u, ev.v, 1))

    def apply(self, events: Iterable[EditEvent]) -> None:
        """Apply base edits one at a time, propagating each through the chain."""
        for ev in events:
            self.graph.apply(ev)
            self.sync()

    def sync(self) -> None:
        edits, self._pending = self._pending, []
        for c in self.coarseners:
            if not edits:
                break
            edits = c.apply(edits)

    def vertices(self, level: int) -> list[int]:
        if level == 0:
            return list(self.graph.adj)
        return list(self.coarseners[level - 1].members)

    def edges(self, level: int) -> dict[Key, int]:
        if level == 0:
            return {k: 1 for k in self.graph.edges.values()}
        return self.coarseners[level - 1].coarse_edges()

    def parent(self, level: int) -> dict[int, int]:
        """Map from level-``level`` vertex to its image one level up."""
        return self.coarseners[level].image

    def base_members(self, level: int, v: int) -> list[int]:
        out = [v]
        for l in range(level - 1, -1, -1):
            out = [w for x in out for w in self.coarseners[l].members[x]]
        return sorted(out)

    def check(self) -> None:
        for c in self.coarseners:
            c.check()

    def dump(self) -> list[dict]:
        """JSON-ready per-level description with partitions over base ids."""
        out = []
        for l, c in enumerate(self.coarseners):
            fine_name = (lambda v: [v]) if l == 0 else (lambda v, l=l: self.base_members(l, v))
            out.append({
                "level": l + 1,
                "partition": sorted(self.base_members(l + 1, x) for x in c.members),
                "matched": sorted(sorted(fine_name(u) + fine_name(v)) for u, v in c.matching()),
                "edges": sorted(
                    [self.base_members(l + 1, a), self.base_members(l + 1, b), n]
                    for a, b, n in ((*k, n) for k, n in c.coarse_edges().items())
                ),
            })
        return out

    def stats(self) -> list[dict]:
        return [c.stats.summary() for c in self.coarseners]


def reeval_bound(max_degree: int) -> float:
    """Expected re-evaluation bound e^(2(d-1)) for maximum degree d."""
    return math.exp(2 * (max_degree - 1))
