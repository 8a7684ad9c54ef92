"""Small helpers for Monte Carlo estimates."""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np


class Estimate(NamedTuple):
    value: float
    stderr: float = 0.0

    def scaled(self, c: float) -> "Estimate":
        return Estimate(c * self.value, abs(c) * self.stderr)

    def __float__(self) -> float:
        return float(self.value)


def mean_estimate(samples) -> Estimate:
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("no samples")
    se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else math.inf
    return Estimate(float(x.mean()), se)


class RunningMoments:
    """Chunked accumulation of a sample mean and its standard error."""

    def __init__(self):
        self.count = 0
        self.total = 0.0
        self.total_sq = 0.0

    def add(self, x: np.ndarray) -> None:
        x = np.asarray(x, dtype=float)
        self.count += x.size
        self.total += float(x.sum())
        self.total_sq += float(np.dot(x, x))

    def estimate(self) -> Estimate:
        n = self.count
        mean = self.total / n
        if n < 2:
            return Estimate(mean, math.inf)
        var = max(self.total_sq / n - mean * mean, 0.0) * n / (n - 1)
        return Estimate(mean, math.sqrt(var / n))
