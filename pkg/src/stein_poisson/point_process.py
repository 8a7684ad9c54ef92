"""Poisson point processes on the flat unit torus [0, 1)^d."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import rng as rng_mod

MAX_DIM = 3


@dataclass(frozen=True)
class TorusDomain:
    dim: int = 1
    period: float = field(default=1.0, init=False)

    def __post_init__(self):
        if not 1 <= self.dim <= MAX_DIM:
            raise ValueError(f"dimension must be in 1..{MAX_DIM}, got {self.dim}")


@dataclass(frozen=True)
class DensitySpec:
    """A bounded probability density on the torus.

    ``eval`` maps an ``(k, d)`` array of points to ``k`` density values.
    ``moments[k]`` holds the integral of ``f**k`` for k = 2..5.
    """

    name: str
    dim: int
    eval: Callable[[np.ndarray], np.ndarray]
    sup_bound: float
    moments: dict[int, float]
    params: dict = field(default_factory=dict)

    @property
    def is_uniform(self) -> bool:
        return self.name == "uniform"

    def moment(self, k: int) -> float:
        return self.moments[k]

    def __call__(self, x) -> np.ndarray:
        return self.eval(np.atleast_2d(np.asarray(x, dtype=float)))


@dataclass
class PointConfiguration:
    points: np.ndarray
    intensity: float
    seed: int = 0
    domain: TorusDomain = field(default_factory=TorusDomain)
    replication: int = 0

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, self.domain.dim)
        if self.points.size and (self.points.min() < 0.0 or self.points.max() >= 1.0):
            raise ValueError("point coordinates must lie in [0, 1)")

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.domain.dim

    def with_point(self, z) -> "PointConfiguration":
        z = np.asarray(z, dtype=float).reshape(1, self.dim)
        return PointConfiguration(np.vstack([self.points, z]), self.intensity, self.seed,
                                  self.domain, self.replication)


# -- densities ---------------------------------------------------------------

def quadrature_moments(func: Callable[[np.ndarray], np.ndarray], dim: int,
                       nodes: int = 256, powers=(1, 2, 3, 4, 5)) -> dict[int, float]:
    """Tensor Gauss-Legendre integrals of ``func**k`` over the unit cube."""
    if nodes ** dim > 4_000_000:
        raise ValueError("quadrature grid too large; lower `nodes`")
    x, w = np.polynomial.legendre.leggauss(nodes)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    grids = np.meshgrid(*([x] * dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    wts = np.ones(pts.shape[0])
    for wg in np.meshgrid(*([w] * dim), indexing="ij"):
        wts = wts * wg.ravel()
    vals = func(pts)
    return {k: float(np.sum(wts * vals ** k)) for k in powers}


def uniform_density(dim: int = 1) -> DensitySpec:
    return DensitySpec("uniform", dim, lambda x: np.ones(x.shape[0]), 1.0,
                       {k: 1.0 for k in range(2, 6)})


def sine_density(amplitude: float = 0.5, dim: int = 1) -> DensitySpec:
    """f(x) = 1 + a sin(2 pi x_1), |a| < 1."""
    a = float(amplitude)
    if not abs(a) < 1.0:
        raise ValueError(f"sine amplitude must satisfy |a| < 1, got {a}")
    # even powers of sin over a period: C(j, j/2) / 2^j
    sin_mom = {0: 1.0, 2: 0.5, 4: 0.375}
    moments = {
        k: sum(math.comb(k, j) * a ** j * sin_mom[j] for j in range(0, k + 1, 2) if j in sin_mom)
        for k in range(2, 6)
    }
    return DensitySpec("sine", dim, lambda x: 1.0 + a * np.sin(2.0 * np.pi * x[:, 0]),
                       1.0 + abs(a), moments, {"amplitude": a})


def tabulated_density(values, dim: int, name: str = "tabulated") -> DensitySpec:
    """Piecewise-constant density from cell values on a regular grid.

    ``values`` has shape ``(k,) * dim``; cell ``i`` covers ``[i/k, (i+1)/k)``.
    The values are rescaled so the density integrates to one.
    """
    vals = np.asarray(values, dtype=float)
    if vals.ndim != dim or len(set(vals.shape)) != 1:
        raise ValueError(f"expected a square grid of dimension {dim}, got shape {vals.shape}")
    if np.any(vals < 0) or not np.all(np.isfinite(vals)):
        raise ValueError("density values must be finite and non-negative")
    total = vals.mean()
    if total <= 0:
        raise ValueError("density values sum to zero")
    vals = vals / total
    k = vals.shape[0]

    def evaluate(x):
        idx = np.minimum((x * k).astype(np.intp), k - 1)
        return vals[tuple(idx[:, j] for j in range(dim))]

    moments = {p: float(np.mean(vals ** p)) for p in range(2, 6)}
    return DensitySpec(name, dim, evaluate, float(vals.max()), moments, {"cells": k})


def load_density_csv(path, dim: int) -> DensitySpec:
    """Load a tabulated density; columns are the cell-centre coordinates then the value."""
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].strip().startswith("#"):
                continue
            try:
                rows.append([float(v) for v in rec])
            except ValueError:
                continue  # header row
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != dim + 1:
        raise ValueError(f"{path}: expected {dim + 1} numeric columns")
    k = round(arr.shape[0] ** (1.0 / dim))
    if k ** dim != arr.shape[0]:
        raise ValueError(f"{path}: {arr.shape[0]} rows do not form a {dim}-d square grid")
    idx = np.floor(arr[:, :dim] * k).astype(int)
    if idx.min() < 0 or idx.max() >= k:
        raise ValueError(f"{path}: coordinates must lie in [0, 1)")
    grid = np.full((k,) * dim, np.nan)
    grid[tuple(idx[:, j] for j in range(dim))] = arr[:, dim]
    if np.isnan(grid).any():
        raise ValueError(f"{path}: grid has missing or duplicated cells")
    return tabulated_density(grid, dim, name=Path(path).stem)


def density_from_name(name: str, dim: int, **params) -> DensitySpec:
    if name == "uniform":
        return uniform_density(dim)
    if name == "sine":
        return sine_density(params.get("amplitude", params.get("a", 0.5)), dim)
    if name in ("tabulated", "csv"):
        return load_density_csv(params["path"], dim)
    raise ValueError(f"unknown density {name!r}; choose uniform, sine or tabulated")


# -- sampling -----------------------------------------------------------------

def sample_density(density: DensitySpec, size: int, gen: np.random.Generator) -> np.ndarray:
    """Draw ``size`` i.i.d. points with density ``f`` by rejection from the uniform law."""
    d = density.dim
    if density.is_uniform:
        return gen.random((size, d))
    m = density.sup_bound
    out = np.empty((0, d))
    while out.shape[0] < size:
        need = size - out.shape[0]
        batch = int(need * m * 1.2) + 16
        prop = gen.random((batch, d))
        keep = gen.random(batch) * m < density.eval(prop)
        out = np.vstack([out, prop[keep]])
    return out[:size]


def sample_poisson_process(n: float, density: DensitySpec, domain: TorusDomain,
                           seed: int, replication: int = 0) -> PointConfiguration:
    """Poisson process with intensity ``n * f`` via thinning of a homogeneous process.

    A homogeneous process of rate ``n * M`` (M >= sup f) is drawn and each point kept
    with probability ``f(x) / M``; the survivors form a Poisson(n) number of
    i.i.d. f-distributed points.
    """
    if not n > 0:
        raise ValueError(f"intensity must be positive, got {n}")
    m = density.sup_bound
    if not math.isfinite(m) or m <= 0:
        raise ValueError(f"density sup_bound must be finite and positive, got {m}")
    if density.dim != domain.dim:
        raise ValueError("density and domain dimensions differ")
    gen = rng_mod.stream(seed, rng_mod.POINTS, replication)
    count = gen.poisson(n * m)
    pts = gen.random((count, domain.dim))
    if not density.is_uniform:
        keep = gen.random(count) * m < density.eval(pts)
        pts = pts[keep]
    return PointConfiguration(pts, float(n), seed, domain, replication)


# -- geometry -----------------------------------------------------------------

def min_image(diff: np.ndarray) -> np.ndarray:
    """Signed coordinatewise wrap of a difference vector into [-1/2, 1/2)."""
    return np.mod(np.asarray(diff, dtype=float) + 0.5, 1.0) - 0.5


def torus_distance(x, y, domain: TorusDomain | None = None) -> np.ndarray | float:
    """Euclidean length of the minimal wrap differences; broadcasts over leading axes."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if domain is not None and x.shape[-1:] != (domain.dim,) and x.ndim > 0:
        raise ValueError("point dimension does not match domain")
    gap = np.abs(x - y)
    gap = np.minimum(gap, 1.0 - gap)
    if gap.ndim == 0:
        return float(gap)
    out = np.sqrt(np.sum(gap * gap, axis=-1))
    return float(out) if out.ndim == 0 else out
