"""Stein equation for h = sin, normal helpers, and the optimality functional E sin(F~)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from . import rng as rng_mod
from .stats import Estimate

SQRT_HALF_PI = math.sqrt(math.pi / 2)
EXP_MINUS_HALF = math.exp(-0.5)


class SteinSolutionSin:
    """Bounded solution of f'(x) - x f(x) = sin(x) - E sin(N).

    E sin(N) = 0, and f(x) = -exp(x^2/2) int_x^inf sin(u) exp(-u^2/2) du. The
    solution is even. It is evaluated through the scaled complementary error
    function, which stays accurate for large |x|.
    """

    @staticmethod
    def f(x):
        a = np.abs(np.asarray(x, dtype=float))
        w = np.exp(1j * a) * special.erfcx((a - 1j) / math.sqrt(2.0))
        return -SQRT_HALF_PI * np.imag(w)

    @classmethod
    def fprime(cls, x):
        x = np.asarray(x, dtype=float)
        return np.sin(x) + x * cls.f(x)

    @classmethod
    def fsecond(cls, x):
        x = np.asarray(x, dtype=float)
        fx = cls.f(x)
        return np.cos(x) + fx + x * (np.sin(x) + x * fx)

    def __call__(self, x):
        return self.f(x)


STEIN_EVAL_LIMIT = 40.0


def stein_sin_eval(x: float) -> tuple[float, float]:
    """(f(x), f'(x)) for the sin Stein solution by adaptive quadrature.

    Independent of the erfcx route and used as its oracle. Inputs are clamped
    to |x| <= 40; f decays only like 1/|x|, so the clamp is a domain limit
    rather than a negligible approximation.
    """
    x = float(np.clip(x, -STEIN_EVAL_LIMIT, STEIN_EVAL_LIMIT))
    a = abs(x)
    # u = a + s turns exp(a^2/2) exp(-u^2/2) into exp(-a s - s^2/2)
    val, _ = integrate.quad(lambda s: math.sin(a + s) * math.exp(-a * s - 0.5 * s * s),
                            0.0, np.inf, limit=400, epsabs=1e-13, epsrel=1e-12)
    f = -val
    return f, math.sin(x) + x * f


def gauss_hermite_expectation(func, nodes: int = 64) -> float:
    """E func(N) for N ~ N(0, 1) by probabilists' Gauss-Hermite quadrature."""
    x, w = np.polynomial.hermite_e.hermegauss(nodes)
    return float(np.sum(w * func(x)) / math.sqrt(2 * math.pi))


def hermite_check(nodes: int = 64, h=np.sin) -> float:
    """3^{-1} E[h(N) H_3(N)] with H_3(x) = x^3 - 3x."""
    return gauss_hermite_expectation(lambda x: h(x) * (x ** 3 - 3 * x), nodes) / 3.0


def expected_second_derivative(nodes: int | None = None) -> float:
    """E f''(N) for the sin Stein solution; closed form e^{-1/2}/3 unless ``nodes`` given."""
    if nodes is None:
        return EXP_MINUS_HALF / 3.0
    return gauss_hermite_expectation(SteinSolutionSin.fsecond, nodes)


# -- normal helpers ----------------------------------------------------------------

def normal_cdf(x):
    return 0.5 * special.erfc(-np.asarray(x, dtype=float) / math.sqrt(2.0))


def normal_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)


_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)


def normal_inv_cdf(p):
    """Standard normal quantile: Acklam's rational approximation plus one Halley step.

    Works on the lower half q = min(p, 1 - p), where 1 - p is exact for p near 1,
    and flips the sign for the upper half.
    """
    p = np.asarray(p, dtype=float)
    if not np.all((p > 0) & (p < 1)):
        raise ValueError("probabilities must lie strictly inside (0, 1)")
    upper = p > 0.5
    q = np.where(upper, 1.0 - p, p)
    r = np.sqrt(-2 * np.log(np.where(q < 0.02425, q, 0.5)))
    tail = ((((_C[0] * r + _C[1]) * r + _C[2]) * r + _C[3]) * r + _C[4]) * r + _C[5]
    tail /= (((_D[0] * r + _D[1]) * r + _D[2]) * r + _D[3]) * r + 1
    c = q - 0.5
    s = c * c
    cen = (((((_A[0] * s + _A[1]) * s + _A[2]) * s + _A[3]) * s + _A[4]) * s + _A[5]) * c
    cen /= ((((_B[0] * s + _B[1]) * s + _B[2]) * s + _B[3]) * s + _B[4]) * s + 1
    x = np.where(q < 0.02425, tail, cen)
    # Halley step against the erfc-based CDF
    u = (normal_cdf(x) - q) * math.sqrt(2 * math.pi) * np.exp(0.5 * x * x)
    x = x - u / (1 + 0.5 * x * u)
    out = np.where(upper, -x, x)
    return out if out.ndim else float(out)


def _psi(x):
    """Antiderivative of Phi: Psi(x) = x Phi(x) + phi(x)."""
    x = np.asarray(x, dtype=float)
    return np.where(np.isinf(x), np.where(x > 0, x, 0.0), x * normal_cdf(x) + normal_pdf(x))


def empirical_w1(samples) -> float:
    """Wasserstein-1 distance between the empirical law of ``samples`` and N(0, 1).

    Computed exactly as int |F_m(x) - Phi(x)| dx, splitting each step of F_m at
    the point where Phi crosses its level.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    m = x.size
    if m == 0:
        raise ValueError("need at least one sample")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples must be finite")
    # tails: int_{-inf}^{x_1} Phi + int_{x_m}^{inf} (1 - Phi)
    total = float(_psi(x[0])) + float(_psi(-x[-1]))
    if m == 1:
        return total
    a, b = x[:-1], x[1:]
    level = np.arange(1, m) / m
    c = np.clip(normal_inv_cdf(level), a, b)
    psi_a, psi_b, psi_c = _psi(a), _psi(b), _psi(c)
    # on [a, c] Phi <= level, on [c, b] Phi >= level
    left = level * (c - a) - (psi_c - psi_a)
    right = (psi_b - psi_c) - level * (b - c)
    return total + float(np.sum(left + right))


# -- the optimality functional ------------------------------------------------------

@dataclass(frozen=True)
class OptimalityEstimate:
    """T_n = E sin(F~) with its scaling T_n sqrt(n)."""

    value: float
    stderr: float
    scaled: float
    scaled_stderr: float
    plain: float
    plain_stderr: float
    control: str
    replications: int
    n: float

    def as_estimate(self) -> Estimate:
        return Estimate(self.value, self.stderr)


def _control_adjust(y: np.ndarray, c: np.ndarray, c_mean: float) -> tuple[float, float]:
    """Control-variate estimate of E y with known E c (coefficient estimated by OLS)."""
    cc = c - c_mean
    var = float(np.dot(cc, cc))
    beta = float(np.dot(cc, y - y.mean()) / var) if var > 0 else 0.0
    adj = y - beta * cc
    return float(adj.mean()), float(adj.std(ddof=1) / math.sqrt(y.size))


def _has_first_chaos(us) -> bool:
    ck = getattr(us, "ck", None)
    return ck is not None and ck.closed_form_available


def optimality_functional(us, replications: int, seed: int = 0, control: str = "first_chaos",
                          threads: int | None = None, values=None) -> OptimalityEstimate:
    """Estimate E sin(F~) for the normalised statistic ``us``.

    ``control`` selects the variance reduction: ``"first_chaos"`` uses
    sin(I1(h1)/sd), whose mean is known exactly; ``"linear"`` uses F~ (mean 0);
    ``"none"`` returns the plain average. All three are unbiased up to the
    O(1/R) bias of an estimated regression coefficient.
    """
    from .parallel import ordered_map
    if replications < 2:
        raise ValueError("need at least two replications")
    if control not in ("first_chaos", "linear", "none"):
        raise ValueError(f"unknown control {control!r}")
    if control == "first_chaos" and not _has_first_chaos(us):
        control = "linear"

    def one(r):
        cfg = us.sample(seed, r)
        v = us.value(cfg)
        c1 = us.first_chaos_value(cfg) if control == "first_chaos" else 0.0
        return v, c1

    if values is None:
        rows = np.asarray(ordered_map(one, range(replications), threads), dtype=float)
    else:
        rows = np.asarray(values, dtype=float)
    f, c1 = rows[:, 0], rows[:, 1]
    y = np.sin(f)
    plain = float(y.mean())
    plain_se = float(y.std(ddof=1) / math.sqrt(y.size))
    if control == "first_chaos":
        val, se = _control_adjust(y, np.sin(c1), us.first_chaos_sin_mean())
    elif control == "linear":
        val, se = _control_adjust(y, f, 0.0)
    else:
        val, se = plain, plain_se
    rn = math.sqrt(us.intensity)
    return OptimalityEstimate(val, se, val * rn, se * rn, plain, plain_se, control,
                              int(y.size), us.intensity)


def normal_reference_functional(replications: int, seed: int = 0) -> Estimate:
    """E sin(N) from standard normal draws; zero up to Monte Carlo error."""
    gen = rng_mod.stream(seed, rng_mod.NORMAL_DRAWS)
    y = np.sin(gen.standard_normal(replications))
    return Estimate(float(y.mean()), float(y.std(ddof=1) / math.sqrt(replications)))


def remainder(value: float, dz: float, fsecond=SteinSolutionSin.fsecond, nodes: int = 16) -> float:
    """R(z) = int_0^1 f''(F + (1 - u) D_z F) u du by Gauss-Legendre."""
    u, w = np.polynomial.legendre.leggauss(nodes)
    u = 0.5 * (u + 1)
    w = 0.5 * w
    return float(np.sum(w * fsecond(value + (1 - u) * dz) * u))


def remainder_diagnostic(us, config, z, f: SteinSolutionSin | None = None, nodes: int = 16) -> float:
    """R(z) for the normalised statistic at configuration ``config`` and point ``z``."""
    fs = (f or SteinSolutionSin()).fsecond
    dz = float(np.atleast_1d(us.df(config, np.atleast_2d(z)))[0])
    return remainder(us.value(config), dz, fs, nodes)
