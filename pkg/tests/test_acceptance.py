"""End-to-end acceptance checks, one test per numbered criterion.

Each test records a one-line verdict in RESULTS; conftest prints them at the
end of the session.  Running this file directly prints the same lines.
"""

import io
import math
import random
import time

import numpy as np
import pytest

from _support import EX_EDGES, example_coarsener, names
from dynlayout import nbody
from dynlayout.bench import bench_matching, compare_convergence
from dynlayout.cli import main as cli_main
from dynlayout.coarsening import CoarseEdit, Coarsener, static_greedy_matching
from dynlayout.dynamics import (LevelGraph, MultilevelState, PhysicsParams, centroid_positions, conservative_force,
                                potential_energy)
from dynlayout.engine import Engine, RunConfig
from dynlayout.graph import ADD_EDGE, ADD_VERTEX, REMOVE_EDGE, REMOVE_VERTEX, BaseGraph, write_events
from dynlayout.integrate import convergence_order, integrate, rk4_step
from dynlayout.scenarios import gnp_triggers, largest_component, scenario_cube, scenario_tree

RESULTS = {}


def verdict(n, ok, detail):
    RESULTS[n] = (bool(ok), detail)
    assert ok, detail


# 1 ---------------------------------------------------------------------------

def oracle_script(seed):
    """Bulk build to a random size (log-uniform up to 2000 edges), then a run of
    mixed single and batched edits.  Yields (batch, vertices, edges)."""
    rng = random.Random(seed)
    target = int(math.exp(rng.uniform(math.log(4), math.log(2000))))
    n = max(4, target // 2 + rng.randrange(4))
    verts = set(range(n))
    edges = set()
    while len(edges) < min(target, n * (n - 1) // 2):
        u, v = rng.sample(range(n), 2)
        edges.add((min(u, v), max(u, v)))
    batch = [CoarseEdit(ADD_VERTEX, v) for v in range(n)]
    batch += [CoarseEdit(ADD_EDGE, u, v, 1) for u, v in sorted(edges)]
    yield batch, verts, edges
    next_v = n
    for _ in range(rng.randrange(15, 45)):
        batch = []
        for _ in range(1 if rng.random() < 0.8 else rng.randrange(2, 6)):
            r = rng.random()
            live = sorted(verts)
            if r < 0.4 and len(edges) < 2000 and len(live) >= 2:
                u, v = rng.sample(live, 2)
                key = (min(u, v), max(u, v))
                if key not in edges:
                    edges.add(key)
                    batch.append(CoarseEdit(ADD_EDGE, *key, 1))
            elif r < 0.8 and edges:
                key = rng.choice(sorted(edges))
                edges.discard(key)
                batch.append(CoarseEdit(REMOVE_EDGE, *key, 1))
            elif r < 0.9:
                verts.add(next_v)
                batch.append(CoarseEdit(ADD_VERTEX, next_v))
                next_v += 1
            elif live:
                v = rng.choice(live)
                for key in sorted(k for k in edges if v in k):
                    edges.discard(key)
                    batch.append(CoarseEdit(REMOVE_EDGE, *key, 1))
                verts.discard(v)
                batch.append(CoarseEdit(REMOVE_VERTEX, v))
        yield batch, verts, edges


def test_criterion_01_oracle_equivalence():
    t0 = time.perf_counter()
    scripts = checks = mismatches = biggest = 0
    for seed in range(1000):
        c = Coarsener(seed)
        for batch, verts, edges in oracle_script(seed):
            c.apply(batch)
            checks += 1
            biggest = max(biggest, len(edges))
            if c.describe() != static_greedy_matching(verts, edges, seed):
                mismatches += 1
        scripts += 1
    elapsed = time.perf_counter() - t0
    verdict(1, mismatches == 0 and elapsed < 120,
            f"{scripts} scripts, {checks} checks, max {biggest} edges, {mismatches} mismatches, {elapsed:.1f}s")


# 2 ---------------------------------------------------------------------------

def test_criterion_02_worked_example():
    c = example_coarsener()
    before = names(c.matching())
    c.apply([CoarseEdit(REMOVE_EDGE, *EX_EDGES["e2"], 1)])
    after = names(c.matching())
    ab, ce, df = frozenset({0, 1}), frozenset({2, 4}), frozenset({3, 5})
    r = c.describe()
    ok = (before == {"e2", "e6"} and after == {"e6", "e5", "e1"} and r.partition == {ab, ce, df}
          and r.coarse_edges == {frozenset({ce, df}): 2, frozenset({ab, df}): 1})
    verdict(2, ok, f"initial {sorted(before)}, after deleting e2 {sorted(after)}, coarse {len(r.coarse_edges)} edges")


# 3 ---------------------------------------------------------------------------

def test_criterion_03_matching_cost():
    t0 = time.perf_counter()
    rep = bench_matching(sizes=(1_000, 100_000), degrees=(2, 3, 4), updates=2000)
    elapsed = time.perf_counter() - t0
    rows = rep["by_degree"]
    ok = all(v["spread"] < 1.5 and max(v["means"]) < v["bound"] for v in rows.values()) and elapsed < 300
    detail = ", ".join(f"d={d}: {v['means'][0]:.2f}/{v['means'][1]:.2f} (x{v['spread']:.2f})" for d, v in rows.items())
    verdict(3, ok, f"{detail}, {elapsed:.0f}s")


# 4 ---------------------------------------------------------------------------

def fd_force(g, x, p, h=1e-6):
    out = np.zeros_like(x)
    for i in range(x.shape[0]):
        for k in range(x.shape[1]):
            xp, xm = x.copy(), x.copy()
            xp[i, k] += h
            xm[i, k] -= h
            out[i, k] = -(potential_energy(g, xp, p) - potential_energy(g, xm, p)) / (2 * h)
    return out


def test_criterion_04_gradient():
    p = PhysicsParams()
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        edges = set()
        while len(edges) < 100:
            u, v = sorted(rng.choice(50, 2, replace=False))
            edges.add((int(u), int(v)))
        g = LevelGraph(np.arange(50), sorted(edges))
        x = rng.random((50, 3)) * 4
        f = conservative_force(g, x, p, exact=True)
        worst = max(worst, np.abs(f - fd_force(g, x, p)).max() / np.abs(f).max())
    verdict(4, worst <= 1e-5, f"worst relative deviation {worst:.2e} over 100 configurations")


# 5 ---------------------------------------------------------------------------

def test_criterion_05_barnes_hut():
    pos = np.random.default_rng(5).random((1000, 3))
    exact = nbody.exact_repulsion(pos)
    tree = nbody.build(pos)
    norm = np.linalg.norm(exact, axis=1)
    rel0 = (np.linalg.norm(nbody.repulsion_all(tree, 0.0) - exact, axis=1) / norm).max()
    rms = np.sqrt(np.mean((np.linalg.norm(nbody.repulsion_all(tree, 0.7) - exact, axis=1) / norm) ** 2))
    net = np.abs(exact.sum(axis=0)).max() / np.abs(exact).sum()
    verdict(5, rel0 < 1e-9 and rms < 0.02 and net < 1e-9,
            f"theta=0 max rel {rel0:.1e}, theta=0.7 rms {100 * rms:.2f}%, net force {net:.1e}")


# 6 ---------------------------------------------------------------------------

def test_criterion_06_equilibrium():
    t0 = time.perf_counter()
    eng = Engine(RunConfig(levels=3, dt=0.1, max_steps=6000))
    eng.apply(scenario_cube(10))
    eng.randomize(seed=0)
    rep = eng.run([], equilibrium_tol=1e-3)
    elapsed = time.perf_counter() - t0
    eq = rep["equilibrium"]
    verdict(6, eq["passed"] and elapsed < 600,
            f"levels {rep['level_sizes']}, {rep['steps']} steps, max gradient {eq['max_gradient']:.1e}, {elapsed:.0f}s")


# 7 ---------------------------------------------------------------------------

def random_chain(sizes, rng):
    graphs = []
    for l, n in enumerate(sizes):
        edges = set()
        while len(edges) < 2 * n:
            u, v = sorted(rng.choice(n, 2, replace=False))
            edges.add((int(u), int(v)))
        parent = None
        if l + 1 < len(sizes):
            up = sizes[l + 1]
            parent = np.r_[np.arange(up), rng.integers(0, up, n - up)]
        graphs.append(LevelGraph(np.arange(n), sorted(edges), [], parent))
    return graphs


@pytest.mark.parametrize("damping", [0.0, 2.0])
def test_criterion_07_decoupling(damping):
    rng = np.random.default_rng(7)
    graphs = random_chain([30, 12, 5], rng)
    p = PhysicsParams(phi=1.0, damping=damping)
    pos = [rng.random((30, 3)) * 3]
    for l in (1, 2):
        pos.append(centroid_positions(pos[-1], graphs[l - 1].parent, graphs[l].n))
    vel = [np.zeros_like(x) for x in pos]
    frozen = MultilevelState.from_world(graphs, p, pos, vel)
    frozen.frozen_coarse = True
    moved = [pos[0], pos[1] + rng.normal(size=pos[1].shape) * 0.5, pos[2] + rng.normal(size=pos[2].shape)]
    free = MultilevelState.from_world(graphs, p, moved, vel)
    worst = 0.0
    for _ in range(1000):
        frozen.flat = rk4_step(frozen.derivatives, frozen.flat, 1e-3)
        free.flat = rk4_step(free.derivatives, free.flat, 1e-3)
        worst = max(worst, np.abs(frozen.world_positions(0) - free.world_positions(0)).max())
    prev = RESULTS.get(7, (True, ""))
    ok = prev[0] and worst < 1e-9
    detail = (prev[1] + "; " if prev[1] else "") + f"d={damping}: max world deviation {worst:.1e}"
    verdict(7, ok, detail)


# 8 ---------------------------------------------------------------------------

@pytest.mark.parametrize("levels", [1, 3])
def test_criterion_08_dissipation(levels):
    dt, steps = 0.01, 500
    p = PhysicsParams()
    fractions, dropped = [], []
    for seed in range(20):
        rng = np.random.default_rng(100 + seed)
        graphs = random_chain([100, 50, 25][:levels], rng)
        pos = [rng.random((100, 3)) * 5]
        for l in range(1, levels):
            pos.append(centroid_positions(pos[-1], graphs[l - 1].parent, graphs[l].n))
        s = MultilevelState.from_world(graphs, p, pos, [np.zeros_like(x) for x in pos])
        energy = [s.potential_energy(0) + s.kinetic_energy(0)]
        for _ in range(steps):
            s.flat = rk4_step(s.derivatives, s.flat, dt)
            energy.append(s.potential_energy(0) + s.kinetic_energy(0))
        fractions.append(np.mean(np.diff(energy) <= 0))
        dropped.append(energy[-1] < energy[0])
    prev = RESULTS.get(8, (True, ""))
    ok = prev[0] and min(fractions) >= 0.95 and all(dropped)
    detail = (prev[1] + "; " if prev[1] else "") + (
        f"{levels} level(s): worst non-increasing fraction {min(fractions):.3f}, final < initial {sum(dropped)}/20")
    verdict(8, ok, detail)


# 9 ---------------------------------------------------------------------------

def test_criterion_09_convergence_ordering():
    cfg = RunConfig(levels=3, dt=0.05, max_steps=6000)
    rep = compare_convergence(cfg, scenario_cube(6), seeds=range(5))
    pairs = [(r["single"]["steps_to_5pct"], r["multi"]["steps_to_5pct"]) for r in rep["runs"]]
    settled = all(r["single"]["settled"] and r["multi"]["settled"] for r in rep["runs"])
    verdict(9, rep["multi_not_slower"] and settled, f"6x6x6 cube (single, multi) steps to 5%: {pairs}")


# 10 --------------------------------------------------------------------------

def oscillator(s):
    return np.array([s[1], -s[0]])


def period_error(method, dt):
    steps = int(round(2 * np.pi / dt))
    s = integrate(oscillator, np.array([1.0, 0.0]), 2 * np.pi / steps, steps, method)
    return float(np.linalg.norm(s - [1.0, 0.0]))


def test_criterion_10_integrator_orders():
    dts = np.array([0.2, 0.1, 0.05, 0.025])
    euler = convergence_order([period_error("euler", h) for h in dts / 10], dts / 10)
    rk4 = convergence_order([period_error("rk4", h) for h in dts], dts)
    verdict(10, abs(euler - 1) <= 0.2 and abs(rk4 - 4) <= 0.3, f"euler {euler:.3f}, rk4 {rk4:.3f}")


# 11 --------------------------------------------------------------------------

def test_criterion_11_determinism(tmp_path):
    ev = tmp_path / "tree.jsonl"
    with open(ev, "w") as fh:
        write_events(scenario_tree(60, seed=3), fh)
    outs = []
    for k in range(2):
        out = tmp_path / f"frames{k}.jsonl"
        args = ["--events", str(ev), "--frames", str(out), "--levels", "3", "--dt", "0.02", "--steps", "400",
                "--seed", "11", "--random-init", "--report", str(tmp_path / f"r{k}.json")]
        assert cli_main(args) == 0
        outs.append(out.read_bytes())
    verdict(11, outs[0] == outs[1] and len(outs[0]) > 0, f"two runs, {len(outs[0])} bytes each, identical")


# 12 --------------------------------------------------------------------------

def test_criterion_12_scenarios():
    n = 500
    big = np.mean([largest_component(n, gnp_triggers(n, 3 / n, s)) / n for s in range(20)])
    small = np.mean([largest_component(n, gnp_triggers(n, 0.5 / n, s)) / n for s in range(20)])
    trees_ok = True
    for seed in range(10):
        g = BaseGraph.replay(scenario_tree(500, seed=seed))
        nv = g.num_vertices()
        trees_ok &= g.num_edges() == nv - 1 and largest_component(nv, g.edge_pairs()) == nv
    verdict(12, big > 0.5 and small < 0.05 and trees_ok,
            f"giant fraction {big:.3f} at 3/n, {small:.4f} at 0.5/n, 10 trees ok={trees_ok}")


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q"]))
