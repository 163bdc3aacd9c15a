"""Coupled multilevel layout dynamics.

Level 0 is the base graph and level ``m - 1`` the coarsest. The coarsest
level carries plain positions and velocities. Every finer level ``l`` places
its vertices relative to their coarse images through an affine frame,

    x_i = delta_i + alpha @ y_i + beta

where ``y_i`` is the world position of the image of ``i`` on level ``l + 1``.
The frame is pulled by the displacements,

    alpha'' = (1/n) sum_i (delta_i y_i^T + y_i delta_i^T) - d_alpha alpha'
    beta''  = (1/n) sum_i delta_i                         - d_beta  beta'

and displacements feel the vertex forces minus a time-dilated pseudoforce:

    delta_i'' = F_i - (beta'' + alpha'' y_i + 2 phi alpha' y_i' + phi^2 alpha y_i'')

with ``F_i`` holding springs, repulsion, the drag ``-d x_i'`` on the world
velocity and the optional gravity pull. ``y_i'`` and ``y_i''`` are the
actual world velocity and acceleration of the coarse image, so at
``phi = 1`` each level follows its own single-level dynamics exactly,
independent of the coarser ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq

from . import nbody


@dataclass
class PhysicsParams:
    """Physical constants. ``f0`` is the constant per unordered vertex pair."""

    K: float = 1.0
    f0: float = 1.0
    eps: float = 0.05
    damping: float = 2.0
    damping_alpha: float = 2.0
    damping_beta: float = 2.0
    phi: float = 0.1
    gravity: float = 0.0
    gravity_dir: tuple = (0.0, 0.0, -1.0)
    dim: int = 3
    theta: float = 0.7
    barnes_hut: bool = False

    def __post_init__(self) -> None:
        if not self.K > 0:
            raise ValueError("K must be > 0")
        if self.f0 < 0 or not self.eps > 0:
            raise ValueError("need f0 >= 0 and eps > 0")
        if min(self.damping, self.damping_alpha, self.damping_beta) < 0:
            raise ValueError("dampings must be >= 0")
        if not 0.0 <= self.phi <= 1.0:
            raise ValueError("phi must lie in [0, 1]")
        if self.dim not in (2, 3):
            raise ValueError("dim must be 2 or 3")
        if self.theta < 0:
            raise ValueError("theta must be >= 0")
        g = np.zeros(self.dim)
        src = np.asarray(self.gravity_dir, dtype=float)[: self.dim]
        g[: len(src)] = src
        norm = np.linalg.norm(g)
        self._gdir = g / norm if norm > 0 else g


@dataclass
class LevelGraph:
    """Frozen structure of one level: vertex ids, springs, parent links."""

    ids: np.ndarray
    edges: np.ndarray  # (k, 2) index pairs
    directed: np.ndarray = field(default_factory=lambda: np.empty((0, 2), dtype=int))  # (tail, head)
    parent: Optional[np.ndarray] = None  # index into the next coarser level

    def __post_init__(self) -> None:
        self.ids = np.asarray(self.ids, dtype=np.int64)
        if self.parent is not None:
            self.parent = np.asarray(self.parent, dtype=np.int64)
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        self.directed = np.asarray(self.directed, dtype=np.int64).reshape(-1, 2)
        n = len(self.ids)
        if len(self.edges):
            i, j = self.edges[:, 0], self.edges[:, 1]
            a = sp.coo_matrix((np.ones(len(i)), (i, j)), shape=(n, n))
            a = (a + a.T).tocsr()
            deg = np.asarray(a.sum(axis=1)).ravel()
            self.laplacian = (sp.diags(deg) - a).tocsr()
        else:
            self.laplacian = sp.csr_matrix((n, n))

    @property
    def n(self) -> int:
        return len(self.ids)


def spring_force(g: LevelGraph, x: np.ndarray, K: float) -> np.ndarray:
    return -K * (g.laplacian @ x)


def repulsion_force(x: np.ndarray, p: PhysicsParams) -> np.ndarray:
    if p.f0 == 0 or len(x) < 2:
        return np.zeros_like(x)
    if p.barnes_hut:
        return nbody.repulsion_all(nbody.build(x), p.theta, p.f0, p.eps)
    return nbody.exact_repulsion(x, p.f0, p.eps)


def gravity_force(g: LevelGraph, x: np.ndarray, p: PhysicsParams) -> np.ndarray:
    """Constant pull on each directed edge: +c w on the head, -c w on the tail."""
    f = np.zeros_like(x)
    if p.gravity == 0 or not len(g.directed):
        return f
    pull = p.gravity * p._gdir
    np.add.at(f, g.directed[:, 1], pull)
    np.subtract.at(f, g.directed[:, 0], pull)
    return f


def conservative_force(g: LevelGraph, x: np.ndarray, p: PhysicsParams, exact: bool = False) -> np.ndarray:
    """-grad V: springs, repulsion and gravity (no damping)."""
    if exact and p.barnes_hut:
        rep = nbody.exact_repulsion(x, p.f0, p.eps) if len(x) > 1 else np.zeros_like(x)
    else:
        rep = repulsion_force(x, p)
    return spring_force(g, x, p.K) + rep + gravity_force(g, x, p)


def potential_energy(g: LevelGraph, x: np.ndarray, p: PhysicsParams, exact: bool = True) -> float:
    """Spring energy + repulsion over unordered pairs + gravity potential."""
    v = 0.0
    if len(g.edges):
        d = x[g.edges[:, 0]] - x[g.edges[:, 1]]
        v += 0.5 * p.K * float(np.einsum("ij,ij->", d, d))
    if p.f0 and len(x) > 1:
        if exact or not p.barnes_hut:
            v += nbody.exact_energy(x, p.f0, p.eps)
        else:
            v += nbody.energy_bh(nbody.build(x), p.theta, p.f0, p.eps)
    if p.gravity and len(g.directed):
        d = x[g.directed[:, 1]] - x[g.directed[:, 0]]
        v -= p.gravity * float((d @ p._gdir).sum())
    return v


def net_force(g: LevelGraph, x: np.ndarray, p: PhysicsParams, velocity: Optional[np.ndarray] = None,
              i: Optional[int] = None) -> np.ndarray:
    """Total force, including drag on ``velocity`` when given."""
    f = conservative_force(g, x, p)
    if velocity is not None:
        f = f - p.damping * velocity
    return f if i is None else f[i]


def frame_acceleration(delta: np.ndarray, y: np.ndarray, dalpha: np.ndarray, dbeta: np.ndarray,
                       p: PhysicsParams) -> tuple[np.ndarray, np.ndarray]:
    n = len(delta)
    if n == 0:
        return np.zeros_like(dalpha), np.zeros_like(dbeta)
    s = delta.T @ y
    alpha_dd = (s + s.T) / n - p.damping_alpha * dalpha
    beta_dd = delta.mean(axis=0) - p.damping_beta * dbeta
    return alpha_dd, beta_dd


def displacement_acceleration(force: np.ndarray, y: np.ndarray, dy: np.ndarray, ddy: np.ndarray,
                              alpha: np.ndarray, dalpha: np.ndarray, alpha_dd: np.ndarray,
                              beta_dd: np.ndarray, phi: float) -> np.ndarray:
    """``force`` already includes the drag on the world velocity."""
    proj = beta_dd + y @ alpha_dd.T + 2.0 * phi * (dy @ dalpha.T) + phi * phi * (ddy @ alpha.T)
    return force - proj


class StateLayout:
    """Offsets of every state component inside the flat state vector.

    Order: coarsest positions, coarsest velocities, then for each finer level
    from coarse to fine: delta, delta', alpha, alpha', beta, beta'.
    """

    def __init__(self, sizes: Sequence[int], dim: int) -> None:
        self.sizes = list(sizes)
        self.dim = dim
        self.m = len(sizes)
        self.slices: dict[tuple[int, str], tuple[slice, tuple]] = {}
        off = 0

        def put(level, name, shape):
            nonlocal off
            size = int(np.prod(shape))
            self.slices[(level, name)] = (slice(off, off + size), shape)
            off += size

        top = self.m - 1
        put(top, "x", (sizes[top], dim))
        put(top, "v", (sizes[top], dim))
        for l in range(self.m - 2, -1, -1):
            put(l, "delta", (sizes[l], dim))
            put(l, "ddelta", (sizes[l], dim))
            put(l, "alpha", (dim, dim))
            put(l, "dalpha", (dim, dim))
            put(l, "beta", (dim,))
            put(l, "dbeta", (dim,))
        self.size = off

    def view(self, flat: np.ndarray, level: int, name: str) -> np.ndarray:
        s, shape = self.slices[(level, name)]
        return flat[s].reshape(shape)

    def component(self, index: int) -> str:
        for (level, name), (s, shape) in self.slices.items():
            if s.start <= index < s.stop:
                k = np.unravel_index(index - s.start, shape)
                return f"level {level} {name}{list(map(int, k))}"
        raise IndexError(index)


class MultilevelState:
    """Structure of all levels plus the flat mechanical state."""

    def __init__(self, graphs: Sequence[LevelGraph], params: PhysicsParams,
                 flat: Optional[np.ndarray] = None) -> None:
        self.graphs = list(graphs)
        self.params = params
        self.layout = StateLayout([g.n for g in self.graphs], params.dim)
        for l, g in enumerate(self.graphs[:-1]):
            if g.parent is None or len(g.parent) != g.n:
                raise ValueError(f"level {l}: parent map missing or wrong length")
            if g.n and (g.parent.min() < 0 or g.parent.max() >= self.graphs[l + 1].n):
                raise ValueError(f"level {l}: parent index out of range")
        if flat is None:
            flat = np.zeros(self.layout.size)
            for l in range(self.m - 1):
                self.view(flat, l, "alpha")[:] = np.eye(params.dim)
        if flat.shape != (self.layout.size,):
            raise ValueError(f"state has length {flat.shape}, layout needs {self.layout.size}")
        self.flat = flat
        self.frozen_coarse = False

    @property
    def m(self) -> int:
        return len(self.graphs)

    def view(self, flat: np.ndarray, level: int, name: str) -> np.ndarray:
        return self.layout.view(flat, level, name)

    # ------------------------------------------------------------ kinematics

    def world(self, flat: Optional[np.ndarray] = None) -> list[tuple[np.ndarray, np.ndarray]]:
        """World positions and velocities per level, evaluated top-down."""
        s = self.flat if flat is None else flat
        top = self.m - 1
        out: list = [None] * self.m
        out[top] = (self.view(s, top, "x"), self.view(s, top, "v"))
        for l in range(self.m - 2, -1, -1):
            px, pv = out[l + 1]
            par = self.graphs[l].parent
            y, dy = px[par], pv[par]
            alpha, dalpha = self.view(s, l, "alpha"), self.view(s, l, "dalpha")
            beta, dbeta = self.view(s, l, "beta"), self.view(s, l, "dbeta")
            x = self.view(s, l, "delta") + y @ alpha.T + beta
            v = self.view(s, l, "ddelta") + dbeta + y @ dalpha.T + dy @ alpha.T
            out[l] = (x, v)
        return out

    def world_positions(self, level: int = 0, flat: Optional[np.ndarray] = None) -> np.ndarray:
        return self.world(flat)[level][0]

    def derivatives(self, flat: Optional[np.ndarray] = None, info: Optional[dict] = None) -> np.ndarray:
        """Time derivative of the flat state."""
        s = self.flat if flat is None else flat
        p = self.params
        out = np.zeros_like(s)
        top = self.m - 1
        x, v = self.view(s, top, "x"), self.view(s, top, "v")
        if self.frozen_coarse and self.m > 1:
            acc = np.zeros_like(x)
            v = np.zeros_like(v)
        else:
            acc = conservative_force(self.graphs[top], x, p) - p.damping * v
            self.view(out, top, "x")[:] = v
            self.view(out, top, "v")[:] = acc
        if info is not None:
            info[top] = (x, v, acc)
        px, pv, pa = x, v, acc
        for l in range(self.m - 2, -1, -1):
            g = self.graphs[l]
            par = g.parent
            y, dy, ddy = px[par], pv[par], pa[par]
            delta, ddelta = self.view(s, l, "delta"), self.view(s, l, "ddelta")
            alpha, dalpha = self.view(s, l, "alpha"), self.view(s, l, "dalpha")
            beta, dbeta = self.view(s, l, "beta"), self.view(s, l, "dbeta")
            wx = delta + y @ alpha.T + beta
            wv = ddelta + dbeta + y @ dalpha.T + dy @ alpha.T
            alpha_dd, beta_dd = frame_acceleration(delta, y, dalpha, dbeta, p)
            force = conservative_force(g, wx, p) - p.damping * wv
            delta_dd = displacement_acceleration(force, y, dy, ddy, alpha, dalpha, alpha_dd, beta_dd, p.phi)
            self.view(out, l, "delta")[:] = ddelta
            self.view(out, l, "ddelta")[:] = delta_dd
            self.view(out, l, "alpha")[:] = dalpha
            self.view(out, l, "dalpha")[:] = alpha_dd
            self.view(out, l, "beta")[:] = dbeta
            self.view(out, l, "dbeta")[:] = beta_dd
            wa = delta_dd + beta_dd + y @ alpha_dd.T + 2.0 * (dy @ dalpha.T) + ddy @ alpha.T
            if info is not None:
                info[l] = (wx, wv, wa)
            px, pv, pa = wx, wv, wa
        return out

    # --------------------------------------------------------------- energies

    def kinetic_energy(self, level: int = 0, flat: Optional[np.ndarray] = None) -> float:
        v = self.world(flat)[level][1]
        return 0.5 * float(np.einsum("ij,ij->", v, v))

    def potential_energy(self, level: int = 0, flat: Optional[np.ndarray] = None, exact: bool = True) -> float:
        return potential_energy(self.graphs[level], self.world_positions(level, flat), self.params, exact)

    def equilibrium_check(self, tol: float, flat: Optional[np.ndarray] = None) -> "EquilibriumReport":
        return equilibrium_check(self.graphs[0], self.world_positions(0, flat), self.params, tol)

    # ---------------------------------------------------------- construction

    @classmethod
    def from_world(cls, graphs: Sequence[LevelGraph], params: PhysicsParams,
                   positions: Sequence[np.ndarray], velocities: Sequence[np.ndarray],
                   frames: Optional[Sequence[Optional[tuple]]] = None) -> "MultilevelState":
        """Build the state whose world positions/velocities are the given ones.

        ``frames[l]`` is ``(alpha, alpha', beta, beta')`` for level ``l``;
        missing frames default to the identity at rest.
        """
        st = cls(graphs, params)
        s = st.flat
        top = st.m - 1
        st.view(s, top, "x")[:] = positions[top]
        st.view(s, top, "v")[:] = velocities[top]
        dim = params.dim
        for l in range(st.m - 2, -1, -1):
            fr = frames[l] if frames is not None and frames[l] is not None else (
                np.eye(dim), np.zeros((dim, dim)), np.zeros(dim), np.zeros(dim))
            alpha, dalpha, beta, dbeta = (np.asarray(a, dtype=float) for a in fr)
            par = graphs[l].parent
            y, dy = positions[l + 1][par], velocities[l + 1][par]
            st.view(s, l, "alpha")[:] = alpha
            st.view(s, l, "dalpha")[:] = dalpha
            st.view(s, l, "beta")[:] = beta
            st.view(s, l, "dbeta")[:] = dbeta
            st.view(s, l, "delta")[:] = positions[l] - y @ alpha.T - beta
            st.view(s, l, "ddelta")[:] = velocities[l] - dbeta - y @ dalpha.T - dy @ alpha.T
        return st

    def frames(self) -> list[Optional[tuple]]:
        out: list = []
        for l in range(self.m - 1):
            out.append(tuple(self.view(self.flat, l, k).copy() for k in ("alpha", "dalpha", "beta", "dbeta")))
        out.append(None)
        return out


def centroid_positions(fine: np.ndarray, parent: np.ndarray, n_coarse: int) -> np.ndarray:
    """Mean of the fine positions mapped to each coarse vertex."""
    out = np.zeros((n_coarse, fine.shape[1]))
    cnt = np.bincount(parent, minlength=n_coarse).astype(float)
    np.add.at(out, parent, fine)
    return out / np.maximum(cnt, 1.0)[:, None]


@dataclass
class EquilibriumReport:
    max_gradient: float
    tol: float
    vertex: int

    @property
    def passed(self) -> bool:
        return self.max_gradient <= self.tol


def equilibrium_check(g: LevelGraph, x: np.ndarray, p: PhysicsParams, tol: float) -> EquilibriumReport:
    """Largest per-vertex norm of the exact single-level gradient of V."""
    if g.n == 0:
        return EquilibriumReport(0.0, tol, -1)
    grad = conservative_force(g, x, p, exact=True)
    norms = np.linalg.norm(grad, axis=1)
    k = int(np.argmax(norms))
    return EquilibriumReport(float(norms[k]), tol, int(g.ids[k]))


def two_body_separation(K: float, f0: float, eps: float) -> float:
    """Rest length of one spring between two repelling vertices:
    root of K r = f0 / (eps + r)^2."""
    if f0 == 0:
        return 0.0
    hi = 1.0
    while K * hi < f0 / (eps + hi) ** 2:
        hi *= 2
    return brentq(lambda r: K * r - f0 / (eps + r) ** 2, 0.0, hi, xtol=1e-15, rtol=1e-15)
