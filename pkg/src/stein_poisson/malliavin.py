"""Pathwise Malliavin quantities and the two terms of the Wasserstein bound.

For an order-2 U-statistic F = E F + I1(h1) + I2(h2) the add-one cost is
D_z F = 2 sum_{x in eta} h(z, x), and since L^{-1} acts as -1/q on chaos q,

    -D_z L^{-1} F = h1(z) + I1(h2(z, .)) = (h1(z) + D_z F) / 2.

The bound is phi = phi1 + phi2 with

    phi1 = sqrt(E (1 - <DF, -DL^{-1}F>)^2),
    phi2 = E int (D_z F)^2 |D_z L^{-1} F| n f(z) dz.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng as rng_mod
from .kernel_algebra import ChaosKernels, torus_lens_volume
from .parallel import ordered_map
from .point_process import PointConfiguration, TorusDomain, sample_density, sample_poisson_process
from .rgg import count_edges, degree, neighbor_pairs
from .stats import Estimate


class DegenerateVarianceError(ValueError):
    pass


class NormalizedUStat:
    """(F - E F) / sqrt(Var F) for the U-statistic F = sum over ordered pairs of h."""

    def __init__(self, ck: ChaosKernels, mean: float | None = None, variance: float | None = None):
        self.ck = ck
        nm = ck.norms
        self.mean = float(nm.mean.value if mean is None else mean)
        self.variance = float(nm.variance.value if variance is None else variance)
        if not self.variance > 0:
            raise DegenerateVarianceError("zero variance: the statistic cannot be normalised")
        self.sd = math.sqrt(self.variance)

    @classmethod
    def edge_count(cls, n: float, t: float, density=None, dim: int = 1, **kw) -> "NormalizedUStat":
        from .kernel_algebra import indicator_kernel
        from .point_process import uniform_density
        density = density or uniform_density(dim)
        return cls(ChaosKernels(indicator_kernel(t), density, n, **kw))

    # -- plumbing ----------------------------------------------------------
    @property
    def intensity(self) -> float:
        return self.ck.intensity

    @property
    def density(self):
        return self.ck.density

    @property
    def domain(self) -> TorusDomain:
        return TorusDomain(self.ck.dim)

    @property
    def is_indicator(self) -> bool:
        return self.ck.kernel.kind == "indicator"

    @property
    def nonneg(self) -> bool:
        return self.ck.kernel.nonneg

    def sample(self, seed: int, replication: int = 0) -> PointConfiguration:
        return sample_poisson_process(self.intensity, self.density, self.domain, seed, replication)

    # -- the statistic -------------------------------------------------------
    def raw(self, config: PointConfiguration) -> float:
        """F = sum over ordered pairs of distinct points of h."""
        if self.is_indicator:
            return float(count_edges(config, self.ck.kernel.radius))
        m = len(config)
        if m < 2:
            return 0.0
        i, j = np.triu_indices(m, k=1)
        return 2.0 * float(self.ck.kernel(config.points[i], config.points[j]).sum())

    def value(self, config: PointConfiguration) -> float:
        return (self.raw(config) - self.mean) / self.sd

    def df(self, config: PointConfiguration, z) -> np.ndarray:
        """D_z F~ at each row of z."""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        if self.is_indicator:
            return degree(config, z, self.ck.kernel.radius).astype(float) / self.sd
        if len(config) == 0:
            return np.zeros(z.shape[0])
        pts = config.points
        out = np.array([self.ck.kernel(np.broadcast_to(zi, pts.shape), pts).sum() for zi in z])
        return 2.0 * out / self.sd

    def dl1f(self, config: PointConfiguration, z, df=None) -> np.ndarray:
        """-D_z L^{-1} F~ = (h1(z) / sd + D_z F~) / 2."""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        if df is None:
            df = self.df(config, z)
        return 0.5 * (self.ck.h1(z) / self.sd + df)

    # -- exact pathwise integrals (indicator kernel, uniform density) --------
    def _require_exact(self):
        if not self.ck.closed_form_available:
            raise NotImplementedError("exact pathwise integrals need the indicator kernel "
                                      "and the uniform density")

    def exact_inner_product(self, config: PointConfiguration) -> float:
        """n int D_z F~ (-D_z L^{-1} F~) dz via pairwise lens volumes."""
        self._require_exact()
        n, t, vol = self.intensity, self.ck.kernel.radius, self.ck.ball
        h1 = n * vol
        m = len(config)
        lens = pair_lens_sum(config.points, t)
        return n / (2 * self.variance) * (h1 * m * vol + lens)

    def exact_phi2_integral(self, config: PointConfiguration) -> float:
        """n int (D_z F~)^2 (-D_z L^{-1} F~) dz by an exact sweep (d = 1)."""
        self._require_exact()
        if self.ck.dim != 1:
            raise NotImplementedError("exact phi2 sweep is implemented for d = 1")
        n, t = self.intensity, self.ck.kernel.radius
        h1 = n * self.ck.ball
        lengths, deg = degree_profile_1d(config.points[:, 0], t)
        return n / (2 * self.sd ** 3) * float(np.sum(lengths * deg ** 2 * (h1 + deg)))

    # -- first-chaos projection (control variate) ------------------------
    def first_chaos_value(self, config: PointConfiguration) -> float:
        """I1(h1) / sd evaluated pathwise; closed form only."""
        self._require_exact()
        return self.intensity * self.ck.ball * (len(config) - self.intensity) / self.sd

    def first_chaos_sin_mean(self) -> float:
        """E sin(I1(h1)/sd) from the Poisson characteristic functional."""
        self._require_exact()
        c = self.intensity * self.ck.ball / self.sd
        return float(np.imag(np.exp(self.intensity * (np.exp(1j * c) - 1 - 1j * c))))


class LinearStatistic:
    """First-chaos functional (sum_x g(x) - n int g f) / sqrt(n int g^2 f).

    D_z F = -D_z L^{-1} F = g(z) / sd is deterministic, so <DF, -DL^{-1}F> = 1.
    Used as the pure first-chaos reference case.
    """

    def __init__(self, g, density, intensity: float, g_mean: float, g_sq_mean: float,
                 g_cube_mean: float | None = None):
        self.g = g
        self.density = density
        self.intensity = float(intensity)
        self.g_mean = float(g_mean)
        self.variance = self.intensity * float(g_sq_mean)
        self.sd = math.sqrt(self.variance)
        self.g_cube_mean = g_cube_mean
        self.nonneg = True

    @classmethod
    def from_chaos(cls, ck: ChaosKernels) -> "LinearStatistic":
        if not ck.closed_form_available:
            raise NotImplementedError("needs a constant first chaos kernel")
        c = ck.intensity * ck.ball
        return cls(lambda z: np.full(np.atleast_2d(z).shape[0], c), ck.density, ck.intensity,
                   c, c * c, c ** 3)

    @property
    def domain(self) -> TorusDomain:
        return TorusDomain(self.density.dim)

    def sample(self, seed: int, replication: int = 0) -> PointConfiguration:
        return sample_poisson_process(self.intensity, self.density, self.domain, seed, replication)

    def value(self, config):
        return (float(np.sum(self.g(config.points))) - self.intensity * self.g_mean) / self.sd

    def df(self, config, z):
        return self.g(np.atleast_2d(z)) / self.sd

    def dl1f(self, config, z, df=None):
        return self.df(config, z) if df is None else df

    def exact_inner_product(self, config) -> float:
        return 1.0

    def exact_phi2_integral(self, config) -> float:
        if self.g_cube_mean is None:
            raise NotImplementedError("cube moment of g not supplied")
        return self.intensity * self.g_cube_mean / self.sd ** 3


# -- pathwise geometry ------------------------------------------------------------

def pair_lens_sum(points: np.ndarray, t: float) -> float:
    """sum over ordered pairs (x, y), diagonal included, of the torus lens of x - y."""
    pts = np.asarray(points, dtype=float)
    m, d = pts.shape
    if m == 0:
        return 0.0
    if d == 1:
        return _pair_lens_sum_1d(pts[:, 0], t)
    from .kernel_algebra import ball_volume
    i, j, w = neighbor_pairs(pts, 2 * t)
    return 2.0 * float(np.sum(torus_lens_volume(w, t))) + m * ball_volume(t, d)


def _pair_lens_sum_1d(x: np.ndarray, t: float) -> float:
    # sum_i sum_{y in x + {-1,0,1}} max(0, 2t - |y - x_i|) with prefix sums
    xs = np.sort(x)
    ext = np.concatenate([xs - 1.0, xs, xs + 1.0])
    csum = np.concatenate([[0.0], np.cumsum(ext)])
    r = 2.0 * t
    lo = np.searchsorted(ext, xs - r, side="left")
    mid = np.searchsorted(ext, xs, side="right")
    hi = np.searchsorted(ext, xs + r, side="right")
    left = (mid - lo) * (r - xs) + (csum[mid] - csum[lo])
    right = (hi - mid) * (r + xs) - (csum[hi] - csum[mid])
    return float(np.sum(left + right))


def degree_profile_1d(x: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Piecewise-constant degree z -> #{x : |x - z| <= t} on the circle.

    Returns segment lengths and the degree on each segment.
    """
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return np.array([1.0]), np.array([0.0])
    start, stop = np.mod(x - t, 1.0), np.mod(x + t, 1.0)
    pos = np.concatenate([start, stop])
    step = np.concatenate([np.ones(x.size), -np.ones(x.size)])
    order = np.argsort(pos, kind="stable")
    pos, step = pos[order], step[order]
    # intervals that wrap past 1 are already active just after 0
    deg0 = float(np.count_nonzero(start > stop))
    edges = np.concatenate([[0.0], pos, [1.0]])
    lengths = np.diff(edges)
    deg = deg0 + np.concatenate([[0.0], np.cumsum(step)])
    return lengths, deg


# -- operations -------------------------------------------------------------------

def pathwise_DF(us, config: PointConfiguration, z):
    out = us.df(config, z)
    return float(out[0]) if np.ndim(z) <= 1 else out


def pathwise_DL1F(us, config: PointConfiguration, z):
    out = us.dl1f(config, z)
    return float(out[0]) if np.ndim(z) <= 1 else out


def _z_points(us, config, z_samples, seed):
    gen = rng_mod.stream(seed, rng_mod.Z_SAMPLES, config.replication)
    return sample_density(us.density, z_samples, gen)


def inner_product_DF(us, config: PointConfiguration, z_samples: int = 256, seed: int = 0,
                     method: str = "monte_carlo") -> Estimate:
    """<DF~, -DL^{-1}F~> = n int D_z F~ (-D_z L^{-1} F~) f(z) dz for one configuration."""
    if method == "exact":
        return Estimate(us.exact_inner_product(config), 0.0)
    if method != "monte_carlo":
        raise ValueError(f"unknown method {method!r}")
    if z_samples < 1:
        raise ValueError("z_samples must be at least 1")
    z = _z_points(us, config, z_samples, seed)
    d = us.df(config, z)
    prod = d * us.dl1f(config, z, d)
    n = us.intensity
    se = n * prod.std(ddof=1) / math.sqrt(z_samples) if z_samples > 1 else math.inf
    return Estimate(n * float(prod.mean()), se)


@dataclass
class ReplicationSample:
    """Per-replication pathwise quantities, in replication order."""

    value: np.ndarray
    inner: np.ndarray
    defect_sq: np.ndarray  # unbiased for (1 - <DF, -DL^{-1}F>)^2
    phi2_integral: np.ndarray
    points: np.ndarray


def _one_replication(us, seed, z_samples, method, r):
    cfg = us.sample(seed, r)
    val = us.value(cfg)
    if method == "exact":
        ip = us.exact_inner_product(cfg)
        dsq = (1.0 - ip) ** 2
        try:
            p2 = us.exact_phi2_integral(cfg)
        except NotImplementedError:
            p2 = _mc_phi2(us, cfg, z_samples, seed)
        return val, ip, dsq, p2, len(cfg)
    z = _z_points(us, cfg, z_samples, seed)
    d = us.df(cfg, z)
    lval = us.dl1f(cfg, z, d)
    prod = d * lval
    n = us.intensity
    ip = n * float(prod.mean())
    if z_samples >= 2:
        # product of two independent half-sample estimates removes the inner-sampling bias
        half = z_samples // 2
        dsq = (1.0 - n * prod[:half].mean()) * (1.0 - n * prod[half:].mean())
    else:
        dsq = (1.0 - ip) ** 2
    p2 = n * float(np.mean(d * d * (lval if us.nonneg else np.abs(lval))))
    return val, ip, dsq, p2, len(cfg)


def _mc_phi2(us, cfg, z_samples, seed):
    z = _z_points(us, cfg, z_samples, seed)
    d = us.df(cfg, z)
    lval = us.dl1f(cfg, z, d)
    return us.intensity * float(np.mean(d * d * (lval if us.nonneg else np.abs(lval))))


def simulate_replications(us, replications: int, seed: int = 0, z_samples: int = 256,
                          method: str = "monte_carlo", threads: int | None = None,
                          start: int = 0) -> ReplicationSample:
    if method not in ("exact", "monte_carlo"):
        raise ValueError(f"unknown method {method!r}")
    rows = ordered_map(lambda r: _one_replication(us, seed, z_samples, method, r),
                       range(start, start + replications), threads)
    arr = np.asarray(rows, dtype=float).reshape(-1, 5)
    return ReplicationSample(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4])


def _phi1_from(sample: ReplicationSample) -> Estimate:
    r = sample.defect_sq.size
    m = float(sample.defect_sq.mean())
    se_m = float(sample.defect_sq.std(ddof=1) / math.sqrt(r))
    phi = math.sqrt(max(m, 0.0))
    return Estimate(phi, se_m / (2 * phi) if phi > 0 else se_m ** 0.5)


def _phi2_from(sample: ReplicationSample) -> Estimate:
    r = sample.phi2_integral.size
    return Estimate(float(sample.phi2_integral.mean()),
                    float(sample.phi2_integral.std(ddof=1) / math.sqrt(r)))


def phi1_chaos(us: NormalizedUStat) -> Estimate:
    """sqrt(9|A|^2 + 4|B|^2 + 12<A,B> + 8|C|^2) / Var with A = h1*h2, B = h2*_2^1 h2, C = h2*_1^1 h2."""
    nm = us.ck.norms
    terms = [(9.0, nm.A_sq), (4.0, nm.B_sq), (12.0, nm.A_B), (8.0, nm.C_sq)]
    sq = sum(c * e.value for c, e in terms)
    se_sq = math.sqrt(sum((c * e.stderr) ** 2 for c, e in terms))
    v = us.variance
    phi = math.sqrt(max(sq, 0.0)) / v
    return Estimate(phi, se_sq / (2 * math.sqrt(sq) * v) if sq > 0 else 0.0)


def phi1(us, replications: int = 1000, z_samples: int = 256, seed: int = 0,
         method: str = "monte_carlo", threads: int | None = None) -> Estimate:
    """sqrt(E (1 - <DF~, -DL^{-1}F~>)^2); ``method='chaos'`` uses the kernel-norm formula."""
    if method == "chaos":
        return phi1_chaos(us)
    if replications < 2:
        raise ValueError("phi1 needs at least two replications")
    return _phi1_from(simulate_replications(us, replications, seed, z_samples, method, threads))


def phi2(us, replications: int = 1000, z_samples: int = 256, seed: int = 0,
         method: str = "monte_carlo", threads: int | None = None) -> Estimate:
    """E int (D_z F~)^2 |D_z L^{-1} F~| n f(z) dz."""
    if replications < 2:
        raise ValueError("phi2 needs at least two replications")
    return _phi2_from(simulate_replications(us, replications, seed, z_samples, method, threads))


@dataclass(frozen=True)
class BoundReport:
    phi1: float
    phi2: float
    phi: float
    phi1_stderr: float
    phi2_stderr: float
    method: str

    @property
    def stderr(self) -> float:
        return math.hypot(self.phi1_stderr, self.phi2_stderr)


def bound_from_sample(sample: ReplicationSample, method: str, phi1_override: Estimate | None = None) -> BoundReport:
    p1 = phi1_override or _phi1_from(sample)
    p2 = _phi2_from(sample)
    return BoundReport(p1.value, p2.value, p1.value + p2.value, p1.stderr, p2.stderr, method)


def wasserstein_upper_bound(us, replications: int = 1000, z_samples: int = 256, seed: int = 0,
                            method: str = "monte_carlo", threads: int | None = None,
                            phi1_method: str | None = None) -> BoundReport:
    """phi1 + phi2, the Stein-Malliavin upper bound on d_W(F~, N)."""
    if replications < 2:
        raise ValueError("the bound needs at least two replications")
    sample = simulate_replications(us, replications, seed, z_samples, method, threads)
    override = phi1_chaos(us) if phi1_method == "chaos" else None
    return bound_from_sample(sample, method if override is None else f"{method}+chaos", override)
