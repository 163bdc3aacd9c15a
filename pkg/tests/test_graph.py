import io
import random

import pytest

from dynlayout.graph import (ADD_EDGE, ADD_VERTEX, REMOVE_EDGE, REMOVE_VERTEX, BaseGraph, EditEvent,
                             GraphError, read_events, write_events)


def random_script(n_ops, seed):
    """Interleaved add/remove ops on a live graph; returns the graph."""
    rng = random.Random(seed)
    g = BaseGraph()
    for _ in range(n_ops):
        r = rng.random()
        verts = list(g.vertices())
        if r < 0.25 or len(verts) < 2:
            g.add_vertex()
        elif r < 0.7:
            u, v = rng.sample(verts, 2)
            if g.edge_between(u, v) is None:
                g.add_edge(u, v)
        elif r < 0.9 and g.edges:
            g.remove_edge(rng.choice(list(g.edges)))
        else:
            g.remove_vertex(rng.choice(verts))
    return g


def test_add_vertex_smallest():
    g = BaseGraph()
    g.add_vertex()
    assert (g.num_vertices(), g.num_edges()) == (1, 0)


def test_add_vertex_ids_distinct():
    g = BaseGraph()
    assert g.add_vertex() != g.add_vertex()


def test_many_vertices():
    g = BaseGraph()
    ids = [g.add_vertex() for _ in range(100_000)]
    assert len(set(ids)) == 100_000
    assert all(g.degree(v) == 0 for v in ids)


def test_add_edge_degrees():
    g = BaseGraph()
    a, b = g.add_vertex(), g.add_vertex()
    g.add_edge(a, b)
    assert (g.degree(a), g.degree(b)) == (1, 1)


def test_self_loop_rejected():
    g = BaseGraph()
    a = g.add_vertex()
    with pytest.raises(GraphError):
        g.add_edge(a, a)


def test_duplicate_edge_rejected_either_direction():
    g = BaseGraph()
    a, b = g.add_vertex(), g.add_vertex()
    g.add_edge(a, b)
    with pytest.raises(GraphError):
        g.add_edge(b, a)


def test_unknown_ids_rejected():
    g = BaseGraph()
    a = g.add_vertex()
    with pytest.raises(GraphError):
        g.add_edge(a, 99)
    with pytest.raises(GraphError):
        g.remove_vertex(99)
    with pytest.raises(GraphError):
        g.remove_edge(0)


def test_triangle_remove_vertex():
    g = BaseGraph()
    a, b, c = (g.add_vertex() for _ in range(3))
    g.add_edge(a, b)
    g.add_edge(b, c)
    g.add_edge(a, c)
    g.remove_vertex(a)
    assert set(g.vertices()) == {b, c}
    assert g.edge_pairs() == {(b, c)}


def test_remove_edge_twice():
    g = BaseGraph()
    a, b = g.add_vertex(), g.add_vertex()
    e = g.add_edge(a, b)
    g.remove_edge(e)
    with pytest.raises(GraphError):
        g.remove_edge(e)


def test_ids_never_reused():
    g = BaseGraph()
    a, b = g.add_vertex(), g.add_vertex()
    e = g.add_edge(a, b)
    g.remove_vertex(b)
    c = g.add_vertex()
    assert c not in (a, b)
    assert g.add_edge(a, c) != e
    with pytest.raises(GraphError):
        g.add_vertex(b)


def test_remove_vertex_logs_incident_edges_first():
    g = BaseGraph()
    a, b, c = (g.add_vertex() for _ in range(3))
    g.add_edge(a, b)
    g.add_edge(a, c)
    g.log.clear()
    g.remove_vertex(a)
    assert [ev.op for ev in g.log] == [REMOVE_EDGE, REMOVE_EDGE, REMOVE_VERTEX]


@pytest.mark.parametrize("n_ops,seed", [(1000, 0), (10_000, 1)])
def test_replay_matches_rebuild(n_ops, seed):
    g = random_script(n_ops, seed)
    h = BaseGraph.replay(g.log)
    assert h.snapshot() == g.snapshot()
    assert sorted(h.degree(v) for v in h.vertices()) == sorted(g.degree(v) for v in g.vertices())


def test_jsonl_round_trip():
    g = random_script(300, 2)
    buf = io.StringIO()
    write_events(g.log, buf)
    buf.seek(0)
    assert read_events(buf) == g.log


def test_directed_flag_is_metadata():
    ev = EditEvent(ADD_EDGE, 0, 1, 0, directed=True)
    g = BaseGraph.replay([EditEvent(ADD_VERTEX, 0), EditEvent(ADD_VERTEX, 1), ev])
    assert g.edges[0] == (0, 1)
    assert g.directed[0] == (1, 0)
    assert read_events([ev.to_json()]) == [ev]


@pytest.mark.parametrize("line", ['{"op": "add_vertex"}', '{"op": "explode", "id": 1}', "not json", "[1]",
                                  '{"op": "add_edge", "id": 0, "u": 1}'])
def test_malformed_line_reports_line_number(line):
    with pytest.raises(GraphError, match="line 2"):
        read_events(['{"op": "add_vertex", "id": 0}', line])
