"""Matching-cost benchmark and single- vs multi-level convergence comparison."""

from __future__ import annotations

import math
import random
from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from .coarsening import CoarseEdit, Coarsener, canonical, reeval_bound, level_seed
from .engine import Engine, RunConfig
from .graph import ADD_EDGE, ADD_VERTEX, REMOVE_EDGE, EditEvent


class BoundedDegreeScript:
    """Random edits on a graph whose maximum degree never exceeds ``d``.

    Vertices are sized so that ``edges`` edges fill roughly 80% of the
    degree budget; every update after the build phase removes a random edge
    and inserts a fresh random one.
    """

    def __init__(self, edges: int, d: int, seed: int = 0) -> None:
        self.rng = random.Random(seed)
        self.d = d
        self.target = edges
        self.n = max(d + 2, int(math.ceil(edges * 2 / d * 1.25)))
        self.deg = [0] * self.n
        self.edges: list[tuple[int, int]] = []
        self.present: set[tuple[int, int]] = set()

    def insertion(self) -> tuple[int, int]:
        rng, d, deg = self.rng, self.d, self.deg
        while True:
            u, v = rng.randrange(self.n), rng.randrange(self.n)
            if u != v and deg[u] < d and deg[v] < d:
                key = canonical(u, v)
                if key not in self.present:
                    break
        self.present.add(key)
        self.edges.append(key)
        deg[u] += 1
        deg[v] += 1
        return key

    def deletion(self) -> tuple[int, int]:
        i = self.rng.randrange(len(self.edges))
        key = self.edges[i]
        self.edges[i] = self.edges[-1]
        self.edges.pop()
        self.present.discard(key)
        self.deg[key[0]] -= 1
        self.deg[key[1]] -= 1
        return key


def measure_reevals(edges: int, d: int, updates: int = 2000, seed: int = 0) -> dict:
    """Mean match re-evaluations per edge insertion/removal once the graph
    holds ``edges`` edges."""
    script = BoundedDegreeScript(edges, d, seed)
    c = Coarsener(level_seed(seed, 0), instrument=True)
    c.apply([CoarseEdit(ADD_VERTEX, v) for v in range(script.n)])
    while len(script.edges) < edges:
        c.apply([CoarseEdit(ADD_EDGE, *script.insertion(), 1)])
    c.stats.reevals.clear()
    c.stats.queue_ops.clear()
    for _ in range(updates):
        c.apply([CoarseEdit(REMOVE_EDGE, *script.deletion(), 1)])
        c.apply([CoarseEdit(ADD_EDGE, *script.insertion(), 1)])
    s = c.stats.summary()
    s.update(edges=edges, max_degree=d, bound=reeval_bound(d))
    return s


def bench_matching(sizes: Sequence[int] = (1_000, 10_000, 100_000), degrees: Sequence[int] = (2, 3, 4),
                   updates: int = 2000, seed: int = 0) -> dict:
    rows = [measure_reevals(E, d, updates, seed) for d in degrees for E in sizes]
    by_d = {}
    for d in degrees:
        means = [r["reevals_mean"] for r in rows if r["max_degree"] == d]
        by_d[d] = {"means": means, "spread": max(means) / min(means), "bound": reeval_bound(d)}
    return {"rows": rows, "by_degree": by_d}


def steps_to_band(values: Sequence[float], frac: float = 0.05) -> int:
    """Number of steps after which every later value stays within ``frac``
    of the final value."""
    v = np.asarray(values, dtype=float)
    if not v.size:
        return 0
    out = np.flatnonzero(np.abs(v - v[-1]) > frac * abs(v[-1]))
    return int(out[-1]) + 2 if out.size else 1


def settle_run(config: RunConfig, events: Sequence[EditEvent], init_seed: int,
               max_steps: Optional[int] = None, engine: Optional[Engine] = None) -> tuple[Engine, list[float]]:
    """Random init, then step until settled; returns the V trace."""
    if engine is None:
        engine = Engine(config)
        engine.apply(events)
    engine.randomize(seed=init_seed)
    budget = max_steps if max_steps is not None else config.max_steps
    trace = []
    for _ in range(budget):
        engine.step()
        trace.append(engine.energies()[0])
        if engine.settled:
            break
    return engine, trace


def compare_convergence(config: RunConfig, events: Sequence[EditEvent], seeds: Sequence[int] = (0,),
                        reset: bool = False) -> dict:
    """Same graph, same random start, single level against ``config.levels``."""
    runs = []
    for s in seeds:
        row = {"seed": s}
        for label, m in (("single", 1), ("multi", config.levels)):
            eng, trace = settle_run(replace(config, levels=m), events, init_seed=s)
            row[label] = {
                "levels": m,
                "steps": len(trace),
                "steps_to_5pct": steps_to_band(trace),
                "final_V": trace[-1] if trace else 0.0,
                "settled": eng.settled,
            }
            if reset and m > 1:
                eng2, trace2 = settle_run(config, events, init_seed=s + 10_000, engine=eng)
                row["multi_reset"] = {
                    "steps": len(trace2),
                    "steps_to_5pct": steps_to_band(trace2),
                    "settled": eng2.settled,
                }
        runs.append(row)
    return {
        "runs": runs,
        "multi_not_slower": all(r["multi"]["steps_to_5pct"] <= r["single"]["steps_to_5pct"] for r in runs),
    }
