"""Mutable level-0 graph with stable ids and an edit-event log."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Optional

ADD_VERTEX = "add_vertex"
REMOVE_VERTEX = "remove_vertex"
ADD_EDGE = "add_edge"
REMOVE_EDGE = "remove_edge"
OPS = (ADD_VERTEX, REMOVE_VERTEX, ADD_EDGE, REMOVE_EDGE)


class GraphError(ValueError):
    """Rejected edit: unknown id, duplicate edge, self-loop, reused id."""


@dataclass(frozen=True)
class EditEvent:
    op: str
    id: int
    u: Optional[int] = None
    v: Optional[int] = None
    t: Optional[float] = None
    directed: bool = False

    def to_json(self) -> str:
        obj: dict = {"op": self.op, "id": self.id}
        if self.u is not None:
            obj["u"] = self.u
            obj["v"] = self.v
        if self.directed:
            obj["directed"] = True
        if self.t is not None:
            obj["t"] = self.t
        return json.dumps(obj)

    @classmethod
    def from_dict(cls, obj: dict) -> "EditEvent":
        op = obj.get("op")
        if op not in OPS:
            raise GraphError(f"unknown op {op!r}")
        if not isinstance(obj.get("id"), int):
            raise GraphError("missing integer 'id'")
        t = obj.get("t")
        if t is not None:
            t = float(t)
        if op == ADD_EDGE:
            u, v = obj.get("u"), obj.get("v")
            if not isinstance(u, int) or not isinstance(v, int):
                raise GraphError("add_edge needs integer 'u' and 'v'")
            return cls(op, obj["id"], u, v, t, bool(obj.get("directed", False)))
        if op == REMOVE_EDGE and isinstance(obj.get("u"), int) and isinstance(obj.get("v"), int):
            # endpoints are informational (the log records them)
            return cls(op, obj["id"], obj["u"], obj["v"], t, bool(obj.get("directed", False)))
        return cls(op, obj["id"], t=t)


def read_events(lines: Iterable[str]) -> list[EditEvent]:
    """Parse a JSON Lines event stream; errors carry the 1-based line number."""
    events = []
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
            if not isinstance(obj, dict):
                raise GraphError("event must be a JSON object")
            events.append(EditEvent.from_dict(obj))
        except (json.JSONDecodeError, GraphError) as exc:
            raise GraphError(f"line {lineno}: {exc}") from None
    return events


def write_events(events: Iterable[EditEvent], fh) -> None:
    for ev in events:
        fh.write(ev.to_json())
        fh.write("\n")


class BaseGraph:
    """Simple undirected graph receiving online edits.

    Edges are keyed by the canonical pair ``(min(u, v), max(u, v))``; the
    ``directed`` flag (tail ``u`` -> head ``v``) is metadata used only by
    the gravity force. Every mutation is appended to :attr:`log` and
    pushed to subscribers.
    """

    def __init__(self) -> None:
        self.adj: dict[int, dict[int, int]] = {}  # v -> {neighbor: edge id}
        self.edges: dict[int, tuple[int, int]] = {}  # edge id -> canonical pair
        self.directed: dict[int, tuple[int, int]] = {}  # edge id -> (tail, head)
        self.log: list[EditEvent] = []
        self._subscribers: list[Callable[[EditEvent], None]] = []
        self._next_vertex = 0
        self._next_edge = 0

    # queries

    def __contains__(self, v: int) -> bool:
        return v in self.adj

    def vertices(self) -> Iterator[int]:
        return iter(self.adj)

    def num_vertices(self) -> int:
        return len(self.adj)

    def num_edges(self) -> int:
        return len(self.edges)

    def degree(self, v: int) -> int:
        return len(self._vertex(v))

    def neighbors(self, v: int) -> Iterable[int]:
        return self._vertex(v).keys()

    def edge_between(self, u: int, v: int) -> Optional[int]:
        return self.adj.get(u, {}).get(v)

    def endpoints(self, e: int) -> tuple[int, int]:
        try:
            return self.edges[e]
        except KeyError:
            raise GraphError(f"unknown edge {e}") from None

    def edge_pairs(self) -> set[tuple[int, int]]:
        return set(self.edges.values())

    def subscribe(self, fn: Callable[[EditEvent], None]) -> None:
        self._subscribers.append(fn)

    # mutations

    def add_vertex(self, vid: Optional[int] = None) -> int:
        if vid is None:
            vid = self._next_vertex
        elif vid < self._next_vertex:
            raise GraphError(f"vertex id {vid} already used")
        self._next_vertex = vid + 1
        self.adj[vid] = {}
        self._emit(EditEvent(ADD_VERTEX, vid))
        return vid

    def add_edge(self, u: int, v: int, eid: Optional[int] = None, directed: bool = False) -> int:
        if u == v:
            raise GraphError(f"self-loop on vertex {u}")
        au, av = self._vertex(u), self._vertex(v)
        if v in au:
            raise GraphError(f"duplicate edge ({u}, {v})")
        if eid is None:
            eid = self._next_edge
        elif eid < self._next_edge:
            raise GraphError(f"edge id {eid} already used")
        self._next_edge = eid + 1
        au[v] = eid
        av[u] = eid
        self.edges[eid] = (min(u, v), max(u, v))
        if directed:
            self.directed[eid] = (u, v)
        self._emit(EditEvent(ADD_EDGE, eid, u, v, directed=directed))
        return eid

    def remove_edge(self, eid: int) -> None:
        u, v = self.endpoints(eid)
        del self.edges[eid]
        self.directed.pop(eid, None)
        del self.adj[u][v]
        del self.adj[v][u]
        self._emit(EditEvent(REMOVE_EDGE, eid, u, v))

    def remove_vertex(self, vid: int) -> None:
        for eid in sorted(self._vertex(vid).values()):
            self.remove_edge(eid)
        del self.adj[vid]
        self._emit(EditEvent(REMOVE_VERTEX, vid))

    def apply(self, ev: EditEvent) -> None:
        if ev.op == ADD_VERTEX:
            self.add_vertex(ev.id)
        elif ev.op == ADD_EDGE:
            self.add_edge(ev.u, ev.v, ev.id, ev.directed)
        elif ev.op == REMOVE_EDGE:
            self.remove_edge(ev.id)
        elif ev.op == REMOVE_VERTEX:
            self.remove_vertex(ev.id)
        else:
            raise GraphError(f"unknown op {ev.op!r}")

    @classmethod
    def replay(cls, events: Iterable[EditEvent]) -> "BaseGraph":
        g = cls()
        for ev in events:
            # remove_vertex expands into remove_edge events in the log; the
            # logged remove_edge entries already cleared the incident edges
            g.apply(ev)
        return g

    def snapshot(self) -> tuple[frozenset, frozenset]:
        return frozenset(self.adj), frozenset(self.edges.items())

    def _vertex(self, v: int) -> dict[int, int]:
        try:
            return self.adj[v]
        except KeyError:
            raise GraphError(f"unknown vertex {v}") from None

    def _emit(self, ev: EditEvent) -> None:
        self.log.append(ev)
        for fn in self._subscribers:
            fn(ev)
