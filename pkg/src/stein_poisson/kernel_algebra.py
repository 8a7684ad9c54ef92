"""Chaos kernels of order-2 Poisson U-statistics and their contractions.

The marked space R+ x Z with control dt x mu is folded onto Z: a U-statistic
driven by a process of intensity n * f has

    h1(z)  = 2 n int h(a, z) f(a) da,        h2 = h,

and every L^p(nu) integral over one time coordinate contributes a factor n.
All norms returned here follow that convention.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy import integrate

from . import rng as rng_mod
from .point_process import DensitySpec, sample_density
from .stats import Estimate, RunningMoments

UNIT_BALL = {1: 2.0, 2: math.pi, 3: 4.0 * math.pi / 3.0}
UNIT_SPHERE = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}

TIME_FACTOR_NOTE = ("norms over the marked space R+ x Z carry one factor n per time "
                    "coordinate, from integrating 1_[0,n](t) dt")


class DegenerateKernelError(ValueError):
    """The first-order chaos kernel vanishes, so the U-statistic asymptotics do not apply."""


# -- geometry -----------------------------------------------------------------

def ball_volume(t: float, d: int) -> float:
    if d not in UNIT_BALL:
        raise ValueError(f"unsupported dimension {d}")
    if t < 0:
        raise ValueError("radius must be non-negative")
    return UNIT_BALL[d] * t ** d


def lens_volume(s, t: float, d: int):
    """Volume of the intersection of two radius-t balls in R^d at centre distance s."""
    if d not in UNIT_BALL:
        raise ValueError(f"unsupported dimension {d}")
    s = np.abs(np.asarray(s, dtype=float))
    inside = s < 2.0 * t
    sc = np.where(inside, s, 0.0)
    if d == 1:
        v = 2.0 * t - sc
    elif d == 2:
        v = 2.0 * t * t * np.arccos(np.clip(sc / (2.0 * t), -1.0, 1.0)) \
            - 0.5 * sc * np.sqrt(np.maximum(4.0 * t * t - sc * sc, 0.0))
    else:
        v = math.pi * (4.0 * t + sc) * (2.0 * t - sc) ** 2 / 12.0
    out = np.where(inside, v, 0.0)
    return float(out) if out.ndim == 0 else out


def torus_lens_volume(w, t: float):
    """Overlap of two radius-t torus balls whose centres differ by the vector(s) w.

    Sums the Euclidean lens over the periodic images; for t < 1/2 the images of a
    ball are disjoint, so this is exact, and it reduces to ``lens_volume`` of the
    torus distance whenever 4t <= 1.
    """
    # fold each coordinate to [0, 1/2] so the result is exactly even in w
    w = np.mod(np.abs(np.atleast_1d(np.asarray(w, dtype=float))), 1.0)
    w = np.minimum(w, 1.0 - w)
    d = w.shape[-1]
    total = np.zeros(w.shape[:-1])
    for k in np.ndindex(*(3,) * d):
        shift = np.asarray(k, dtype=float) - 1.0
        total = total + lens_volume(np.linalg.norm(w + shift, axis=-1), t, d)
    return float(total) if total.ndim == 0 else total


def lens_square_integral(t: float, d: int) -> float:
    """Integral over the torus of torus_lens_volume(w, t)**2 dw."""
    if d == 1:
        pts = sorted({p for p in (2 * t, 1 - 2 * t) if 0 < p < 1})
        val, _ = integrate.quad(lambda w: torus_lens_volume([w], t) ** 2, 0.0, 1.0,
                                points=pts or None, limit=200, epsabs=1e-15, epsrel=1e-13)
        return val
    if 4 * t <= 1:
        val, _ = integrate.quad(lambda s: lens_volume(s, t, d) ** 2 * UNIT_SPHERE[d] * s ** (d - 1),
                                0.0, 2 * t, epsabs=0, epsrel=1e-13, limit=200)
        return val
    # images overlap: tensor Gauss-Legendre over [0, 1/2]^d using the reflection symmetry
    nodes = 400 if d == 2 else 90
    x, wq = np.polynomial.legendre.leggauss(nodes)
    x, wq = 0.25 * (x + 1.0), 0.25 * wq
    grids = np.meshgrid(*([x] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    wts = np.prod(np.stack([g.ravel() for g in np.meshgrid(*([wq] * d), indexing="ij")]), axis=0)
    return float(2 ** d * np.sum(wts * torus_lens_volume(pts, t) ** 2))


# -- kernels ------------------------------------------------------------------

def _sq_torus_dist(x, y):
    gap = np.abs(x - y)
    gap = np.minimum(gap, 1.0 - gap)
    return np.sum(gap * gap, axis=-1)


@dataclass(frozen=True)
class KernelSpec:
    """Symmetric order-2 kernel evaluated row-wise: ``func(x, y)`` for ``(k, d)`` arrays."""

    kind: str
    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    radius: float | None = None
    nonneg: bool = True
    sup_bound: float | None = None
    name: str = ""

    def __call__(self, x, y) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.atleast_2d(np.asarray(y, dtype=float))
        return np.asarray(self.func(x, y), dtype=float)

    def scaled(self, c: float) -> "KernelSpec":
        f = self.func
        return KernelSpec("general", lambda x, y: c * f(x, y), None, self.nonneg and c >= 0,
                          None if self.sup_bound is None else abs(c) * self.sup_bound,
                          f"{c:g}*{self.name}")


def indicator_kernel(t: float) -> KernelSpec:
    """h(x, y) = 1/2 * 1{0 < |x - y| <= t}: the edge-counting kernel."""
    if not 0.0 < t < 0.5:
        raise ValueError(f"radius must satisfy 0 < t < 1/2, got {t}")
    t2 = t * t

    def h(x, y):
        s = _sq_torus_dist(x, y)
        return 0.5 * ((s > 0) & (s <= t2))

    return KernelSpec("indicator", h, radius=float(t), nonneg=True, sup_bound=0.5,
                      name=f"indicator(t={t:g})")


def general_kernel(func, nonneg: bool = False, sup_bound: float | None = None,
                   name: str = "general") -> KernelSpec:
    return KernelSpec("general", func, None, nonneg, sup_bound, name)


def constant_kernel(c: float = 1.0) -> KernelSpec:
    return KernelSpec("general", lambda x, y: np.full(x.shape[0], float(c)), None, c >= 0,
                      abs(c), f"constant({c:g})")


def zero_kernel() -> KernelSpec:
    return constant_kernel(0.0)


# -- chaos norms ----------------------------------------------------------------

@dataclass(frozen=True)
class ChaosNorms:
    """Norms and inner products of the chaos kernels, nu-convention.

    A = h1 *_1^1 h2, B = h2 *_2^1 h2, C = h2 *_1^1 h2.
    """

    mean: Estimate
    h1_sq: Estimate
    h2_sq: Estimate
    h1_cube: Estimate
    h1_quart: Estimate
    A_sq: Estimate
    A_cube: Estimate
    h1_A: Estimate
    B_sq: Estimate
    A_B: Estimate
    C_sq: Estimate
    backend: str

    @property
    def variance(self) -> Estimate:
        return Estimate(self.h1_sq.value + 2.0 * self.h2_sq.value,
                        math.hypot(self.h1_sq.stderr, 2.0 * self.h2_sq.stderr))


def _closed_form_norms(n: float, t: float, d: int) -> ChaosNorms:
    v = ball_volume(t, d)
    e = lambda x: Estimate(float(x), 0.0)  # noqa: E731
    return ChaosNorms(
        mean=e(n * n * v / 2),
        h1_sq=e(n ** 3 * v ** 2),
        h2_sq=e(n * n * v / 4),
        h1_cube=e(n ** 4 * v ** 3),
        h1_quart=e(n ** 5 * v ** 4),
        A_sq=e(n ** 5 * v ** 4 / 4),
        A_cube=e(n ** 7 * v ** 6 / 8),
        h1_A=e(n ** 4 * v ** 3 / 2),
        B_sq=e(n ** 3 * v ** 2 / 16),
        A_B=e(n ** 4 * v ** 3 / 8),
        C_sq=e(n ** 4 * lens_square_integral(t, d) / 16),
        backend="closed_form",
    )


def base_integrals(kernel: KernelSpec, density: DensitySpec, samples: int = 1_000_000,
                   seed: int = 0, chunk: int = 200_000) -> dict[str, Estimate]:
    """n-free integrals of kernel products against f, by independent-sample Monte Carlo.

    With hbar(z) = int h(a, z) f(a) da and Abar(y) = int hbar(z) h(z, y) f(z) dz:
    e1 = int h, e2 = int h^2, s2/s3/s4 = int hbar^2/^3/^4, aa = int Abar^2,
    a3 = int Abar^3, h1a = int hbar Abar, bb = int (int h^2(x, .))^2,
    ab = int Abar(x) int h^2(x, a) da, cc = int int (int h(x, a) h(y, a) da)^2.
    Each is an expectation of a product of kernel values at independent points,
    so the sample mean is unbiased for nonnegative and signed kernels alike
    (s3, a3 are the signed cubes).
    """
    gen = rng_mod.stream(seed, rng_mod.QUADRATURE)
    acc = {k: RunningMoments() for k in ("e1", "e2", "s2", "s3", "s4", "aa", "a3", "h1a",
                                         "bb", "ab", "cc")}
    h = kernel.func
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        draw = lambda: sample_density(density, m, gen)  # noqa: E731
        x, y, z, a, a2, a3_, a4 = (draw() for _ in range(7))
        hxy = h(x, y)
        acc["e1"].add(hxy)
        acc["e2"].add(hxy * hxy)
        haz, ha2z, ha3z, ha4z = h(a, z), h(a2, z), h(a3_, z), h(a4, z)
        acc["s2"].add(haz * ha2z)
        acc["s3"].add(haz * ha2z * ha3z)
        acc["s4"].add(haz * ha2z * ha3z * ha4z)
        # Abar(y) = E[h(a, z) h(z, y)]; three independent copies around a shared y
        z2, z3 = draw(), draw()
        c1 = h(a, z) * h(z, y)
        c2 = h(a2, z2) * h(z2, y)
        c3 = h(a3_, z3) * h(z3, y)
        acc["aa"].add(c1 * c2)
        acc["a3"].add(c1 * c2 * c3)
        acc["h1a"].add(h(a4, y) * c1)
        # B-type terms around shared x (reuse y as the second free point)
        hx_a, hx_a2 = h(x, a), h(x, a2)
        acc["bb"].add(hx_a ** 2 * hx_a2 ** 2)
        acc["ab"].add(h(a3_, z3) * h(z3, x) * h(x, a4) ** 2)
        acc["cc"].add(hx_a * h(y, a) * hx_a2 * h(y, a2))
        done += m
    return {k: v.estimate() for k, v in acc.items()}


def _mc_norms(kernel: KernelSpec, density: DensitySpec, n: float, samples: int, seed: int) -> ChaosNorms:
    b = base_integrals(kernel, density, samples, seed)
    return ChaosNorms(
        mean=b["e1"].scaled(n * n),
        h1_sq=b["s2"].scaled(4 * n ** 3),
        h2_sq=b["e2"].scaled(n * n),
        h1_cube=b["s3"].scaled(8 * n ** 4),
        h1_quart=b["s4"].scaled(16 * n ** 5),
        A_sq=b["aa"].scaled(4 * n ** 5),
        A_cube=b["a3"].scaled(8 * n ** 7),
        h1_A=b["h1a"].scaled(4 * n ** 4),
        B_sq=b["bb"].scaled(n ** 3),
        A_B=b["ab"].scaled(2 * n ** 4),
        C_sq=b["cc"].scaled(n ** 4),
        backend="monte_carlo",
    )


@dataclass
class ChaosKernels:
    """Kernels h1, h2 of the order-2 U-statistic driven by intensity ``n * f``."""

    kernel: KernelSpec
    density: DensitySpec
    intensity: float
    samples: int = 1_000_000
    seed: int = 0
    backend: str = "auto"
    time_factor: str = field(default=TIME_FACTOR_NOTE, init=False, repr=False)

    def __post_init__(self):
        if not self.intensity > 0:
            raise ValueError("intensity must be positive")
        if self.backend == "auto":
            self.backend = "closed_form" if self.closed_form_available else "monte_carlo"
        elif self.backend == "closed_form" and not self.closed_form_available:
            raise ValueError("closed forms need the indicator kernel and the uniform density")

    @property
    def closed_form_available(self) -> bool:
        return self.kernel.kind == "indicator" and self.density.is_uniform

    @property
    def dim(self) -> int:
        return self.density.dim

    @property
    def ball(self) -> float:
        return ball_volume(self.kernel.radius, self.dim)

    def _inner_points(self, stream_id: int, size: int | None = None) -> np.ndarray:
        gen = rng_mod.stream(self.seed, rng_mod.QUADRATURE, 1, stream_id)
        return sample_density(self.density, size or self.samples, gen)

    def h1(self, z) -> np.ndarray:
        """First chaos kernel at the points z; Monte Carlo uses a fixed inner sample."""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        if self.backend == "closed_form":
            return np.full(z.shape[0], self.intensity * self.ball)
        a = self._inner_points(0, min(self.samples, 20_000))
        return np.array([2 * self.intensity * self.kernel(a, np.broadcast_to(zi, a.shape)).mean()
                         for zi in z])

    def h2(self, x, y) -> np.ndarray:
        return self.kernel(x, y)

    @cached_property
    def norms(self) -> ChaosNorms:
        if self.backend == "closed_form":
            return _closed_form_norms(self.intensity, self.kernel.radius, self.dim)
        return _mc_norms(self.kernel, self.density, self.intensity, self.samples, self.seed)


# -- contractions ----------------------------------------------------------------

def _point(x, d):
    return np.asarray(x, dtype=float).reshape(1, d)


def contraction_21(ck: ChaosKernels, x) -> Estimate:
    """(h2 *_2^1 h2)(x) = n int h(x, a)^2 f(a) da."""
    n = ck.intensity
    if ck.backend == "closed_form":
        return Estimate(n * ck.ball / 4, 0.0)
    a = ck._inner_points(1)
    xx = np.broadcast_to(_point(x, ck.dim), a.shape)
    v = ck.kernel(xx, a) ** 2
    return Estimate(n * v.mean(), n * v.std(ddof=1) / math.sqrt(v.size))


def contraction_11(ck: ChaosKernels, x, y) -> Estimate:
    """(h2 *_1^1 h2)(x, y) = n int h(x, a) h(y, a) f(a) da."""
    n = ck.intensity
    if ck.backend == "closed_form":
        w = _point(y, ck.dim) - _point(x, ck.dim)
        return Estimate(n / 4 * float(torus_lens_volume(w[0], ck.kernel.radius)), 0.0)
    a = ck._inner_points(1)
    v = ck.kernel(np.broadcast_to(_point(x, ck.dim), a.shape), a) \
        * ck.kernel(np.broadcast_to(_point(y, ck.dim), a.shape), a)
    return Estimate(n * v.mean(), n * v.std(ddof=1) / math.sqrt(v.size))


def contraction_h1h2(ck: ChaosKernels, x) -> Estimate:
    """(h1 *_1^1 h2)(x) = 2 n^2 int int h(a, y) h(x, y) f(a) f(y) da dy."""
    n = ck.intensity
    if ck.backend == "closed_form":
        return Estimate(n * n * ck.ball ** 2 / 2, 0.0)
    a = ck._inner_points(1)
    y = ck._inner_points(2)
    v = ck.kernel(a, y) * ck.kernel(np.broadcast_to(_point(x, ck.dim), y.shape), y)
    return Estimate(2 * n * n * v.mean(), 2 * n * n * v.std(ddof=1) / math.sqrt(v.size))


def exact_mean_variance(ck: ChaosKernels) -> tuple[float, float]:
    """Mean n^2 int int h and variance ||h1||^2 + 2 ||h2||^2 from the isometry."""
    nm = ck.norms
    return float(nm.mean.value), float(nm.variance.value)


# -- constants for geometric U-statistics ----------------------------------------

@dataclass(frozen=True)
class UStatConstants:
    alpha_sq: float
    alpha: float
    rho: float
    phi_tilde_coefficient: float
    optimality_predicate: bool
    h1_sq: float
    h1_cube: float
    A_sq: float
    h1_A: float
    backend: str


def ustat_constants(h: KernelSpec, density: DensitySpec, samples: int = 200_000,
                    seed: int = 0) -> UStatConstants:
    """alpha^2, rho and the rate coefficient for the n-free kernel h1(z) = int h(x, z) f(x) dx.

    alpha^2 = 9 ||h1||_2^2 ||h1 *_1^1 h||_2^2 / ||h1||_3^6,
    rho     = -3 <h1, h1 *_1^1 h> / ||h1||_3^3,
    coefficient = ||h1||_3^3 / ||h1||_2^3 (the rate is coefficient / sqrt(n)).
    """
    if h.kind == "indicator" and density.is_uniform:
        v = ball_volume(h.radius, density.dim)
        s2, s3, aa, h1a = (v / 2) ** 2, (v / 2) ** 3, (v * v / 4) ** 2, (v / 2) * (v * v / 4)
        backend = "closed_form"
    else:
        b = base_integrals(h, density, samples, seed)
        s2, aa, h1a = b["s2"].value, b["aa"].value, b["h1a"].value
        s3 = b["s3"].value if h.nonneg else _abs_cube(h, density, samples, seed)
        backend = "monte_carlo"
    if not s2 > 0:
        raise DegenerateKernelError("||h1||_2 = 0: the first chaos vanishes")
    alpha_sq = 9.0 * s2 * aa / s3 ** 2
    rho = -3.0 * h1a / s3
    alpha = math.sqrt(alpha_sq)
    return UStatConstants(alpha_sq, alpha, rho, s3 / s2 ** 1.5, alpha * rho != -0.5,
                          s2, s3, aa, h1a, backend)


def _abs_cube(h: KernelSpec, density: DensitySpec, samples: int, seed: int) -> float:
    # plug-in int |hbar|^3 for signed kernels
    gen = rng_mod.stream(seed, rng_mod.QUADRATURE, 2)
    outer = max(1000, int(math.sqrt(samples)))
    z = sample_density(density, outer, gen)
    a = sample_density(density, outer, gen)
    hbar = np.array([h(a, np.broadcast_to(zi, a.shape)).mean() for zi in z])
    return float(np.mean(np.abs(hbar) ** 3))
