"""Simulation loop: edits in, integration steps, frames out."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import IO, Iterable, Optional

import numpy as np

from .coarsening import LevelChain
from .dynamics import LevelGraph, MultilevelState, PhysicsParams, centroid_positions, potential_energy
from .graph import EditEvent
from .integrate import STEPPERS

log = logging.getLogger(__name__)

PLACEMENT_JITTER = 1e-2
SETTLE_SPEED = 1e-3
SETTLE_STEPS = 100


@dataclass
class RunConfig:
    levels: int = 3
    integrator: str = "rk4"
    dt: float = 0.01
    events_per_step: int = 1
    params: PhysicsParams = field(default_factory=PhysicsParams)
    seed: int = 0
    max_steps: int = 10_000
    frame_stride: int = 1
    settle: bool = True
    instrument: bool = False
    diagnostics: bool = True

    def __post_init__(self) -> None:
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.frame_stride < 1:
            raise ValueError("frame stride must be >= 1")
        if self.integrator not in STEPPERS:
            raise ValueError(f"unknown integrator {self.integrator!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = asdict(self.params)
        d["params"]["gravity_dir"] = list(self.params.gravity_dir)
        return d


class Engine:
    """Owns the level chain and the mechanical state of every level."""

    def __init__(self, config: Optional[RunConfig] = None) -> None:
        self.config = config or RunConfig()
        self.params = self.config.params
        self.chain = LevelChain(self.config.levels, self.config.seed, self.config.instrument)
        self.state: Optional[MultilevelState] = None
        self.t = 0.0
        self.steps = 0
        self.frames_out = 0
        self._dirty = True
        self._step = STEPPERS[self.config.integrator]
        self._still = 0
        self._last_speed = np.inf
        self.rebuild()

    # -------------------------------------------------------------- structure

    @property
    def graph(self):
        return self.chain.graph

    def apply(self, events: Iterable[EditEvent]) -> int:
        n = 0
        for ev in events:
            self.chain.apply([ev])
            n += 1
        if n:
            self._dirty = True
            self._still = 0
        return n

    def _level_graphs(self) -> list[LevelGraph]:
        chain = self.chain
        graphs = []
        index: list[dict[int, int]] = []
        for l in range(chain.levels):
            ids = sorted(chain.vertices(l))
            index.append({v: k for k, v in enumerate(ids)})
        for l in range(chain.levels):
            ix = index[l]
            ids = sorted(ix, key=ix.__getitem__)
            if l == 0:
                g = chain.graph
                edges = [(ix[u], ix[v]) for u, v in sorted(g.edges.values())]
                directed = [(ix[a], ix[b]) for _, (a, b) in sorted(g.directed.items())]
            else:
                edges = [(ix[u], ix[v]) for u, v in sorted(chain.edges(l))]
                directed = []
            parent = None
            if l + 1 < chain.levels:
                img = chain.parent(l)
                up = index[l + 1]
                parent = np.array([up[img[v]] for v in ids], dtype=np.int64)
            graphs.append(LevelGraph(np.array(ids, dtype=np.int64), edges, directed, parent))
        return graphs

    def rebuild(self) -> None:
        """Re-derive the flat state after structural edits.

        Surviving vertices keep their world position and velocity; new base
        vertices appear next to their already-placed neighbours (or at the
        origin) with a small jitter and zero velocity; new coarse vertices sit
        at the centroid of their members.
        """
        dim = self.params.dim
        graphs = self._level_graphs()
        old: list[dict[int, tuple]] = [dict() for _ in graphs]
        frames = None
        if self.state is not None:
            frames = self.state.frames()
            for l, (x, v) in enumerate(self.state.world()):
                ids = self.state.graphs[l].ids
                old[l] = {int(i): (x[k], v[k]) for k, i in enumerate(ids)}
        positions, velocities = [], []
        for l, g in enumerate(graphs):
            x = np.zeros((g.n, dim))
            v = np.zeros((g.n, dim))
            known = np.zeros(g.n, dtype=bool)
            for k, vid in enumerate(g.ids):
                hit = old[l].get(int(vid))
                if hit is not None:
                    x[k], v[k] = hit
                    known[k] = True
            if l == 0:
                self._place_new(g, x, known)
            else:
                prev = graphs[l - 1]
                cx = centroid_positions(positions[l - 1], prev.parent, g.n)
                cv = centroid_positions(velocities[l - 1], prev.parent, g.n)
                x[~known] = cx[~known]
                v[~known] = cv[~known]
            positions.append(x)
            velocities.append(v)
        self.state = MultilevelState.from_world(graphs, self.params, positions, velocities, frames)
        self._dirty = False

    def _place_new(self, g: LevelGraph, x: np.ndarray, known: np.ndarray) -> None:
        todo = np.flatnonzero(~known)
        if not todo.size:
            return
        placed = known.copy()
        nbrs: dict[int, list[int]] = {int(k): [] for k in todo}
        for a, b in g.edges:
            if a in nbrs:
                nbrs[a].append(int(b))
            if b in nbrs:
                nbrs[b].append(int(a))
        pending = [int(k) for k in todo]
        while pending:
            rest = []
            for k in pending:
                anchor = [j for j in nbrs[k] if placed[j]]
                if anchor:
                    x[k] = x[anchor].mean(axis=0)
                    placed[k] = True
                else:
                    rest.append(k)
            if len(rest) == len(pending):
                break  # no neighbour placed: origin
            pending = rest
        for k in todo:
            rng = np.random.default_rng([self.config.seed & 0xFFFFFFFF, int(g.ids[k])])
            d = rng.normal(size=x.shape[1])
            d *= PLACEMENT_JITTER * rng.random() ** (1.0 / x.shape[1]) / max(np.linalg.norm(d), 1e-300)
            x[k] = x[k] + d

    def randomize(self, scale: Optional[float] = None, seed: Optional[int] = None) -> None:
        """Uniform random base positions in a box, everything at rest."""
        if self._dirty:
            self.rebuild()
        graphs = self.state.graphs
        n, dim = graphs[0].n, self.params.dim
        if scale is None:
            scale = max(n, 1) ** (1.0 / dim)
        rng = np.random.default_rng(self.config.seed if seed is None else seed)
        x0 = (rng.random((n, dim)) - 0.5) * scale
        positions, velocities = [x0], [np.zeros_like(x0)]
        for l in range(1, len(graphs)):
            positions.append(centroid_positions(positions[-1], graphs[l - 1].parent, graphs[l].n))
            velocities.append(np.zeros_like(positions[-1]))
        self.state = MultilevelState.from_world(graphs, self.params, positions, velocities)
        self._still = 0

    # --------------------------------------------------------------- stepping

    def step(self) -> None:
        if self._dirty:
            self.rebuild()
        st = self.state
        st.flat = self._step(st.derivatives, st.flat, self.config.dt, st.layout.component)
        self.t += self.config.dt
        self.steps += 1
        speed = self.max_speed()
        self._last_speed = speed
        self._still = self._still + 1 if speed < SETTLE_SPEED else 0

    def max_speed(self) -> float:
        if self.state is None or self.state.graphs[0].n == 0:
            return 0.0
        v = self.state.world()[0][1]
        return float(np.sqrt(np.einsum("ij,ij->i", v, v).max()))

    @property
    def settled(self) -> bool:
        return self._still >= SETTLE_STEPS

    def positions(self) -> dict[int, np.ndarray]:
        if self._dirty:
            self.rebuild()
        x = self.state.world_positions(0)
        return {int(i): x[k] for k, i in enumerate(self.state.graphs[0].ids)}

    def energies(self) -> tuple[float, float]:
        if self._dirty:
            self.rebuild()
        st = self.state
        if st.graphs[0].n == 0:
            return 0.0, 0.0
        V = potential_energy(st.graphs[0], st.world_positions(0), self.params, exact=not self.params.barnes_hut)
        return V, st.kinetic_energy(0)

    def frame(self) -> dict:
        if self._dirty:
            self.rebuild()
        st = self.state
        x = st.world_positions(0)
        verts = [[int(i), *map(float, x[k])] for k, i in enumerate(st.graphs[0].ids)]
        out = {"frame": self.frames_out, "t": round(self.t, 12), "vertices": verts}
        if self.config.diagnostics:
            V, T = self.energies()
            out["V"] = V
            out["T"] = T
        self.frames_out += 1
        return out

    # ------------------------------------------------------------------- loop

    def run(self, events: Iterable[EditEvent], frames: Optional[IO[str]] = None,
            equilibrium_tol: Optional[float] = None) -> dict:
        """Interleave edits with steps until the stream ends and the layout
        settles (or the step budget runs out)."""
        cfg = self.config
        events = list(events)
        timed = sorted((e for e in events if e.t is not None), key=lambda e: e.t)
        untimed = [e for e in events if e.t is None]
        ti = ui = 0
        if frames is not None:
            frames.write(json.dumps({"header": {"config": cfg.to_dict()}}) + "\n")
        while self.steps < cfg.max_steps:
            due = []
            while ti < len(timed) and timed[ti].t <= self.t + 1e-12:
                due.append(timed[ti])
                ti += 1
            take = min(cfg.events_per_step, len(untimed) - ui)
            due.extend(untimed[ui:ui + take])
            ui += take
            self.apply(due)
            exhausted = ti == len(timed) and ui == len(untimed)
            if self.graph.num_vertices() == 0 and exhausted:
                break
            if exhausted and cfg.settle and self.settled:
                if equilibrium_tol is None or self.state.equilibrium_check(equilibrium_tol).passed:
                    break
            self.step()
            if frames is not None and (self.steps - 1) % cfg.frame_stride == 0:
                frames.write(json.dumps(self.frame()) + "\n")
        return self.report(equilibrium_tol)

    def report(self, equilibrium_tol: Optional[float] = None) -> dict:
        V, T = self.energies()
        tol = 1e-3 if equilibrium_tol is None else equilibrium_tol
        eq = self.state.equilibrium_check(tol)
        return {
            "steps": self.steps,
            "t": self.t,
            "vertices": self.graph.num_vertices(),
            "edges": self.graph.num_edges(),
            "level_sizes": [g.n for g in self.state.graphs],
            "V": V,
            "T": T,
            "max_speed": self.max_speed(),
            "settled": self.settled,
            "equilibrium": {"max_gradient": eq.max_gradient, "tol": tol, "passed": eq.passed},
            "coarsening": self.chain.stats() if self.config.instrument else None,
        }
