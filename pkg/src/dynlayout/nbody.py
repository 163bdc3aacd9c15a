"""Pairwise repulsion f0 / (eps + r)^2, exact and by Barnes-Hut.

Each unordered pair of points repels with magnitude ``f0 / (eps + r)**2``
and contributes ``f0 / (eps + r)`` to the potential. Coincident points
(r < COINCIDENT) get a deterministic pseudo-random direction keyed by the
index pair, antisymmetric in the pair so momentum is still conserved.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist, pdist

COINCIDENT = 1e-12
_CHUNK = 256


def jitter_directions(i: np.ndarray, j: np.ndarray, dim: int) -> np.ndarray:
    """Unit vectors for coincident pairs: u(i, j) == -u(j, i)."""
    i = np.asarray(i, dtype=np.uint64)
    j = np.asarray(j, dtype=np.uint64)
    lo, hi = np.minimum(i, j), np.maximum(i, j)
    out = np.empty((lo.size, dim))
    with np.errstate(over="ignore"):
        x = lo * np.uint64(0x9E3779B97F4A7C15) ^ hi * np.uint64(0xC2B2AE3D27D4EB4F)
        for k in range(dim):
            x = x ^ (x >> np.uint64(29))
            x = x * np.uint64(0xBF58476D1CE4E5B9) + np.uint64(k + 1)
            x = x ^ (x >> np.uint64(32))
            out[:, k] = (x >> np.uint64(11)).astype(np.float64) / 2.0**53 - 0.5
    norm = np.linalg.norm(out, axis=1, keepdims=True)
    out /= np.where(norm > 0, norm, 1.0)
    sign = np.where(i <= j, 1.0, -1.0)[:, None]
    return out * sign


def _pair_terms(diff, dist, rows, cols, f0, eps):
    """Force on ``rows`` from ``cols`` given separation vectors ``diff``."""
    close = dist < COINCIDENT
    safe = np.where(close, 1.0, dist)
    unit = diff / safe[..., None]
    if close.any():
        ii, jj = np.nonzero(close)
        unit[ii, jj] = jitter_directions(rows[ii], cols[jj], diff.shape[-1])
    mag = f0 / (eps + dist) ** 2
    return mag[..., None] * unit


def exact_repulsion(pos: np.ndarray, f0: float = 1.0, eps: float = 0.05) -> np.ndarray:
    """Direct O(n^2) repulsion force on every point.

    Written as F_i = x_i * sum_j w_ij - sum_j w_ij x_j with
    w_ij = f0 / ((eps + r_ij)^2 r_ij), on centered coordinates.
    """
    pos = np.asarray(pos, dtype=float)
    n = len(pos)
    out = np.zeros_like(pos)
    if n < 2:
        return out
    x = pos - pos.mean(axis=0)
    for s in range(0, n, _CHUNK * 8):
        rows = np.arange(s, min(s + _CHUNK * 8, n))
        dist = cdist(x[rows], x)
        dist[np.arange(len(rows)), rows] = np.inf
        close = dist < COINCIDENT
        w = f0 / ((eps + dist) ** 2 * np.where(close, 1.0, dist))
        w[close] = 0.0
        out[rows] = x[rows] * w.sum(axis=1)[:, None] - w @ x
        if close.any():
            ii, jj = np.nonzero(close)
            mag = f0 / (eps + dist[ii, jj]) ** 2
            dirs = jitter_directions(rows[ii], jj, pos.shape[1])
            np.add.at(out, rows[ii], mag[:, None] * dirs)
    return out


def exact_repulsion_at(pos: np.ndarray, i: int, f0: float = 1.0, eps: float = 0.05) -> np.ndarray:
    pos = np.asarray(pos, dtype=float)
    rows = np.array([i])
    diff = pos[i][None, None, :] - pos[None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    f = _pair_terms(diff, dist, rows, np.arange(len(pos)), f0, eps)
    f[0, i] = 0.0
    return f[0].sum(axis=0)


def exact_energy(pos: np.ndarray, f0: float = 1.0, eps: float = 0.05) -> float:
    """Sum of f0 / (eps + r) over unordered pairs."""
    pos = np.asarray(pos, dtype=float)
    n = len(pos)
    if n < 2:
        return 0.0
    return float((f0 / (eps + pdist(pos))).sum())


@dataclass
class BHTree:
    """Flat Barnes-Hut tree (quadtree in 2-D, octree in 3-D).

    Node 0 is the root. ``width`` is the side of the node's cube, ``centroid``
    the mean of the contained points. Leaves hold their point indices in
    ``points``; internal nodes list children in ``children``.
    """

    pos: np.ndarray
    lo: list = field(default_factory=list)
    width: list = field(default_factory=list)
    count: list = field(default_factory=list)
    centroid: list = field(default_factory=list)
    children: list = field(default_factory=list)
    points: list = field(default_factory=list)
    depth: list = field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.width)

    def is_leaf(self, k: int) -> bool:
        return not self.children[k]

    def leaf_of(self, i: int) -> int:
        for k in range(self.size):
            if self.points[k] is not None and i in self.points[k]:
                return k
        raise KeyError(i)

    def subtree_points(self, k: int) -> np.ndarray:
        stack, out = [k], []
        while stack:
            n = stack.pop()
            if self.children[n]:
                stack.extend(self.children[n])
            else:
                out.append(self.points[n])
        return np.concatenate(out) if out else np.empty(0, dtype=int)


def build(pos: np.ndarray, leaf_size: int = 1, max_depth: int = 40) -> BHTree:
    """Build the tree; points sharing a cell at ``max_depth`` share a leaf."""
    pos = np.asarray(pos, dtype=float)
    n, dim = pos.shape if pos.ndim == 2 else (0, 3)
    tree = BHTree(pos)
    if n == 0:
        return tree
    lo = pos.min(axis=0)
    width = float((pos.max(axis=0) - lo).max())
    width = width * (1 + 1e-9) if width > 0 else 1.0
    bits = 1 << np.arange(dim)
    stack = [(np.arange(n), lo, width, 0, None)]
    while stack:
        idx, nlo, w, depth, parent = stack.pop()
        k = tree.size
        tree.lo.append(nlo)
        tree.width.append(w)
        tree.count.append(idx.size)
        tree.centroid.append(pos[idx].mean(axis=0))
        tree.depth.append(depth)
        tree.children.append([])
        if parent is not None:
            tree.children[parent].append(k)
        if idx.size <= leaf_size or depth >= max_depth or np.ptp(pos[idx], axis=0).max() == 0.0:
            tree.points.append(idx)
            continue
        tree.points.append(None)
        half = w / 2
        code = ((pos[idx] >= nlo + half) * bits).sum(axis=1)
        for c in np.unique(code)[::-1]:
            sub = idx[code == c]
            off = ((c & bits) > 0) * half
            stack.append((sub, nlo + off, half, depth + 1, k))
    return tree


def _accumulate(tree: BHTree, targets: np.ndarray, theta: float, f0: float, eps: float,
                energy: bool) -> np.ndarray:
    pos = tree.pos
    dim = pos.shape[1]
    out = np.zeros(len(targets)) if energy else np.zeros((len(targets), dim))
    if tree.size == 0 or len(targets) == 0:
        return out
    slot = np.arange(len(targets))
    stack = [(0, slot)]
    while stack:
        k, sl = stack.pop()
        tp = pos[targets[sl]]
        if not tree.children[k]:
            members = tree.points[k]
            diff = tp[:, None, :] - pos[members][None, :, :]
            dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
            same = targets[sl][:, None] == members[None, :]
            if energy:
                e = np.where(same, 0.0, f0 / (eps + dist))
                out[sl] += e.sum(axis=1)
            else:
                f = _pair_terms(diff, dist, targets[sl], members, f0, eps)
                f[same] = 0.0
                out[sl] += f.sum(axis=1)
            continue
        w = tree.width[k]
        c = tree.centroid[k]
        diff = tp - c
        dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        inside = np.all((tp >= tree.lo[k]) & (tp <= tree.lo[k] + w), axis=1)
        far = (w < theta * dist) & ~inside
        if far.any():
            d = dist[far]
            cnt = tree.count[k]
            if energy:
                out[sl[far]] += cnt * f0 / (eps + d)
            else:
                out[sl[far]] += (cnt * f0 / (eps + d) ** 2 / d)[:, None] * diff[far]
        near = sl[~far]
        if near.size:
            for ch in tree.children[k]:
                stack.append((ch, near))
    return out


def repulsion(tree: BHTree, i: int, theta: float = 0.7, f0: float = 1.0, eps: float = 0.05) -> np.ndarray:
    """Approximate repulsion on point ``i``; a node is opened while
    width / distance-to-centroid > theta."""
    return _accumulate(tree, np.array([i]), theta, f0, eps, False)[0]


def repulsion_all(tree: BHTree, theta: float = 0.7, f0: float = 1.0, eps: float = 0.05) -> np.ndarray:
    return _accumulate(tree, np.arange(len(tree.pos)), theta, f0, eps, False)


def energy_bh(tree: BHTree, theta: float = 0.7, f0: float = 1.0, eps: float = 0.05) -> float:
    """Repulsion potential using the same node approximation as the forces."""
    per_point = _accumulate(tree, np.arange(len(tree.pos)), theta, f0, eps, True)
    return 0.5 * float(per_point.sum())
