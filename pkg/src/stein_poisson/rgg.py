"""Edge counting, degrees and neighbour pairs for random geometric graphs on the torus.

Two search paths are provided: a flat cell list (any dimension) and a sorted sweep
for d = 1, which is used by default there because it is O(m log m).
"""
from __future__ import annotations

import itertools
import math

import numba
import numpy as np

from .point_process import PointConfiguration


def check_radius(t: float) -> float:
    t = float(t)
    if not 0.0 < t < 0.5:
        raise ValueError(f"radius must satisfy 0 < t < 1/2 on the unit torus, got {t}")
    return t


@numba.njit(cache=True)
def _dist2(pts, i, q):
    s = 0.0
    for a in range(pts.shape[1]):
        g = abs(pts[i, a] - q[a])
        g = min(g, 1.0 - g)
        s += g * g
    return s


@numba.njit(cache=True)
def _cell_of(q, k):
    d = q.shape[0]
    c = 0
    for a in range(d):
        ca = min(int(q[a] * k), k - 1)
        c = c * k + ca
    return c


@numba.njit(cache=True)
def _shift_cell(cell, off, k, d):
    # decompose linear cell id, shift by offset with wrap, recompose
    out = 0
    mult = 1
    for a in range(d - 1, -1, -1):
        ca = cell % k
        cell //= k
        ca = (ca + off[a]) % k
        out += ca * mult
        mult *= k
    return out


@numba.njit(cache=True)
def _count_ordered_pairs(pts, cells, starts, counts, offsets, k, r2):
    m, d = pts.shape
    total = 0
    for i in range(m):
        for o in range(offsets.shape[0]):
            nc = _shift_cell(cells[i], offsets[o], k, d)
            for j in range(starts[nc], starts[nc] + counts[nc]):
                if j == i:
                    continue
                s = _dist2(pts, j, pts[i])
                if 0.0 < s <= r2:
                    total += 1
    return total


@numba.njit(cache=True)
def _pairs(pts, cells, starts, counts, offsets, k, r2, fill, out_i, out_j):
    m, d = pts.shape
    n = 0
    for i in range(m):
        for o in range(offsets.shape[0]):
            nc = _shift_cell(cells[i], offsets[o], k, d)
            for j in range(starts[nc], starts[nc] + counts[nc]):
                if j <= i:
                    continue
                s = _dist2(pts, j, pts[i])
                if s <= r2:
                    if fill:
                        out_i[n] = i
                        out_j[n] = j
                    n += 1
    return n


@numba.njit(cache=True)
def _query_counts(pts, starts, counts, offsets, k, queries, r2):
    q, d = queries.shape
    out = np.zeros(q, dtype=np.int64)
    for u in range(q):
        c0 = _cell_of(queries[u], k)
        for o in range(offsets.shape[0]):
            nc = _shift_cell(c0, offsets[o], k, d)
            for j in range(starts[nc], starts[nc] + counts[nc]):
                s = _dist2(pts, j, queries[u])
                if 0.0 < s <= r2:
                    out[u] += 1
    return out


class NeighborGrid:
    """Immutable cell list over a point set with cells of side at least ``radius``.

    Points are stored sorted by cell; indices returned by :meth:`pairs` refer to
    the original order.
    """

    def __init__(self, points: np.ndarray, radius: float):
        pts = np.ascontiguousarray(points, dtype=float)
        if pts.ndim != 2:
            raise ValueError("points must be an (m, d) array")
        if not 0.0 < radius:
            raise ValueError("radius must be positive")
        self.radius = float(radius)
        self.dim = pts.shape[1]
        self.cells_per_axis = max(1, int(math.floor(1.0 / self.radius)))
        self.cell_size = 1.0 / self.cells_per_axis
        k, d = self.cells_per_axis, self.dim
        idx = np.minimum((pts * k).astype(np.int64), k - 1)
        lin = np.zeros(pts.shape[0], dtype=np.int64)
        for a in range(d):
            lin = lin * k + idx[:, a]
        self.order = np.argsort(lin, kind="stable")
        self.points = pts[self.order]
        self.cells = lin[self.order]
        ncell = k ** d
        self.counts = np.bincount(self.cells, minlength=ncell).astype(np.int64)
        self.starts = np.concatenate([[0], np.cumsum(self.counts)[:-1]]).astype(np.int64)
        # neighbour offsets, deduplicated when fewer than three cells per axis
        seen = set()
        offs = []
        for off in itertools.product((-1, 0, 1), repeat=d):
            key = tuple(o % k for o in off)
            if key not in seen:
                seen.add(key)
                offs.append(off)
        self.offsets = np.asarray(offs, dtype=np.int64)

    @property
    def buckets(self) -> dict[tuple[int, ...], np.ndarray]:
        """Map from cell index vector to original point indices."""
        out = {}
        k = self.cells_per_axis
        for c in np.nonzero(self.counts)[0]:
            vec = tuple(int(v) for v in np.unravel_index(c, (k,) * self.dim))
            s = self.starts[c]
            out[vec] = self.order[s:s + self.counts[c]]
        return out

    def _r2(self, r):
        r = self.radius if r is None else float(r)
        if r > self.cell_size:
            raise ValueError("query radius exceeds the grid cell size")
        return r * r

    def count_pairs(self, r: float | None = None) -> int:
        """Unordered pairs of distinct points with 0 < distance <= r."""
        n = _count_ordered_pairs(self.points, self.cells, self.starts, self.counts,
                                 self.offsets, self.cells_per_axis, self._r2(r))
        return n // 2

    def pairs(self, r: float | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Index arrays (i, j), i < j in original order, of pairs within distance r."""
        r2 = self._r2(r)
        args = (self.points, self.cells, self.starts, self.counts, self.offsets,
                self.cells_per_axis, r2)
        empty = np.empty(0, dtype=np.int64)
        n = _pairs(*args, False, empty, empty)
        oi = np.empty(n, dtype=np.int64)
        oj = np.empty(n, dtype=np.int64)
        _pairs(*args, True, oi, oj)
        a, b = self.order[oi], self.order[oj]
        return np.minimum(a, b), np.maximum(a, b)

    def query_counts(self, queries, r: float | None = None) -> np.ndarray:
        q = np.ascontiguousarray(np.atleast_2d(queries), dtype=float)
        return _query_counts(self.points, self.starts, self.counts, self.offsets,
                             self.cells_per_axis, q, self._r2(r))


# -- d = 1 sweep ---------------------------------------------------------------

def _edges_1d(x: np.ndarray, t: float) -> int:
    x = np.sort(x)
    m = x.size
    if m < 2:
        return 0
    idx = np.arange(m)
    hi = np.searchsorted(x, x + t, side="right")
    wrap_lo = np.searchsorted(x, x + (1.0 - t), side="left")
    dup = np.searchsorted(x, x, side="right") - idx - 1
    inner = hi - idx - 1
    wrap = m - np.maximum(wrap_lo, hi)
    return int(inner.sum() + wrap.sum() - dup.sum())


def _degree_1d(x: np.ndarray, z: np.ndarray, t: float) -> np.ndarray:
    xs = np.sort(x)
    ext = np.concatenate([xs - 1.0, xs, xs + 1.0])
    cnt = np.searchsorted(ext, z + t, side="right") - np.searchsorted(ext, z - t, side="left")
    same = np.searchsorted(xs, z, side="right") - np.searchsorted(xs, z, side="left")
    return (cnt - same).astype(np.int64)


# -- public API ---------------------------------------------------------------

def count_edges(config: PointConfiguration, t: float, method: str = "auto") -> int:
    """Number of unordered pairs of points at torus distance in (0, t]."""
    t = check_radius(t)
    pts = config.points
    if method == "auto":
        method = "sweep" if config.dim == 1 else "grid"
    if method == "sweep":
        if config.dim != 1:
            raise ValueError("sweep method is only available for d = 1")
        return _edges_1d(pts[:, 0], t)
    if method == "grid":
        if len(pts) < 2:
            return 0
        return NeighborGrid(pts, t).count_pairs()
    if method == "brute":
        return brute_force_edges(pts, t)
    raise ValueError(f"unknown method {method!r}")


def degree(config: PointConfiguration, z, t: float, method: str = "auto"):
    """Number of configuration points at distance in (0, t] from each query point.

    ``z`` is one point (returns an int) or an ``(q, d)`` array (returns an array).
    """
    t = check_radius(t)
    z_arr = np.asarray(z, dtype=float)
    single = z_arr.ndim == 0 or (z_arr.ndim == 1 and z_arr.shape[0] == config.dim)
    q = z_arr.reshape(-1, config.dim)
    if len(config) == 0:
        out = np.zeros(q.shape[0], dtype=np.int64)
    else:
        if method == "auto":
            method = "sweep" if config.dim == 1 else "grid"
        if method == "sweep":
            out = _degree_1d(config.points[:, 0], q[:, 0], t)
        elif method == "grid":
            out = NeighborGrid(config.points, t).query_counts(q)
        elif method == "brute":
            from .point_process import torus_distance
            dist = torus_distance(q[:, None, :], config.points[None, :, :])
            out = np.sum((dist > 0) & (dist * dist <= t * t), axis=1)
        else:
            raise ValueError(f"unknown method {method!r}")
    return int(out[0]) if single else out


def brute_force_edges(points: np.ndarray, t: float) -> int:
    """O(m^2) reference count."""
    pts = np.asarray(points, dtype=float)
    m = pts.shape[0]
    if m < 2:
        return 0
    i, j = np.triu_indices(m, k=1)
    gap = np.abs(pts[i] - pts[j])
    gap = np.minimum(gap, 1.0 - gap)
    s = np.sum(gap * gap, axis=1)
    return int(np.count_nonzero((s > 0) & (s <= t * t)))


def neighbor_pairs(points: np.ndarray, r: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pairs i < j with torus distance <= r and their min-image differences x_j - x_i.

    Works for any r < sqrt(d)/2; with fewer than three cells per axis the grid
    degenerates gracefully to an all-pairs scan.
    """
    pts = np.asarray(points, dtype=float)
    if pts.shape[0] < 2:
        e = np.empty(0, dtype=np.int64)
        return e, e, np.empty((0, pts.shape[1]))
    grid = NeighborGrid(pts, min(r, 1.0))
    if r <= grid.cell_size:
        i, j = grid.pairs(r)
    else:
        i, j = np.triu_indices(pts.shape[0], k=1)
    w = pts[j] - pts[i]
    w = np.mod(w + 0.5, 1.0) - 0.5
    if r > grid.cell_size:
        keep = np.sum(w * w, axis=1) <= r * r
        i, j, w = i[keep], j[keep], w[keep]
    return i, j, w
