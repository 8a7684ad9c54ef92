"""Fast invariant checks run by ``stein-poisson selftest``."""
from __future__ import annotations

import math

import numpy as np


def _checks(quick: bool):
    from .kernel_algebra import constant_kernel, ustat_constants
    from .malliavin import NormalizedUStat, simulate_replications
    from .point_process import PointConfiguration, TorusDomain, uniform_density
    from .rgg import brute_force_edges, count_edges, degree
    from .stein import SteinSolutionSin, empirical_w1, normal_inv_cdf

    def edges_agree():
        gen = np.random.default_rng(1)
        for d in (1, 2, 3):
            for _ in range(20):
                pts = gen.random((int(gen.integers(0, 60)), d))
                cfg = PointConfiguration(pts, 1.0, 0, TorusDomain(d))
                if count_edges(cfg, 0.2) != brute_force_edges(pts, 0.2):
                    return False
        return True

    def add_one_cost():
        gen = np.random.default_rng(2)
        for _ in range(50):
            pts = gen.random((int(gen.integers(0, 40)), 2))
            cfg = PointConfiguration(pts, 1.0, 0, TorusDomain(2))
            z = gen.random(2)
            if count_edges(cfg.with_point(z), 0.15) - count_edges(cfg, 0.15) != degree(cfg, z, 0.15):
                return False
        return True

    def stein_residual():
        x = np.linspace(-8, 8, 2001)
        f = SteinSolutionSin
        return float(np.max(np.abs(f.fprime(x) - x * f.f(x) - np.sin(x)))) <= 1e-8

    def w1_zero():
        return abs(empirical_w1(np.zeros(7)) - math.sqrt(2 / math.pi)) < 1e-12

    def inv_cdf():
        return abs(normal_inv_cdf(0.975) - 1.959963984540054) < 1e-9

    def constants():
        c = ustat_constants(constant_kernel(1.0), uniform_density(1))
        return c.alpha_sq == 9.0 and c.rho == -3.0

    def inner_product_mean():
        us = NormalizedUStat.edge_count(128, 128 ** -0.25)
        s = simulate_replications(us, 300 if quick else 2000, seed=0, method="exact")
        se = s.inner.std(ddof=1) / math.sqrt(s.inner.size)
        return abs(s.inner.mean() - 1.0) <= 4 * se

    return [("edge counting backends agree", edges_agree),
            ("add-one cost equals degree", add_one_cost),
            ("Stein residual", stein_residual),
            ("W1 of a point mass at 0", w1_zero),
            ("normal quantile", inv_cdf),
            ("constants for h = 1", constants),
            ("mean inner product is 1", inner_product_mean)]


def run_selftest(quick: bool = False, stream=print) -> bool:
    ok = True
    for name, fn in _checks(quick):
        try:
            passed = bool(fn())
        except Exception as exc:  # report and keep going
            passed = False
            name = f"{name} ({exc!r})"
        ok &= passed
        stream(f"{'PASS' if passed else 'FAIL'}  {name}")
    return ok
