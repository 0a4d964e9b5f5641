"""Point estimates with 95% confidence intervals and their provenance."""

from __future__ import annotations

import math
from statistics import NormalDist
from dataclasses import asdict, dataclass, field
from typing import Optional

Z95 = 1.959963984540054


@dataclass(frozen=True)
class Estimate:
    point: float
    ci_low: float
    ci_high: float
    trials: int
    seed: Optional[int] = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.ci_low <= self.point <= self.ci_high):
            raise ValueError(f"interval [{self.ci_low}, {self.ci_high}] excludes {self.point}")

    @property
    def half_width(self) -> float:
        return 0.5 * (self.ci_high - self.ci_low)

    def contains(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high

    def to_json(self) -> dict:
        return asdict(self)


def wilson_interval(successes: int, trials: int, z: float = Z95):
    if trials <= 0:
        raise ValueError("trials must be positive")
    p = successes / trials
    denom = 1.0 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    # clamp against rounding so the point estimate stays inside
    return min(p, centre - half), max(p, centre + half)


def proportion_estimate(successes: int, trials: int, seed=None, **extra) -> Estimate:
    lo, hi = wilson_interval(successes, trials)
    return Estimate(successes / trials, lo, hi, trials, seed, dict(extra))


def simultaneous_z(comparisons: int, level: float = 0.95) -> float:
    """Two-sided z for ``comparisons`` intervals holding jointly at ``level`` (Bonferroni)."""
    return NormalDist().inv_cdf(1 - (1 - level) / (2 * comparisons))


def within_wilson(point: float, trials: int, value: float, z: float = Z95) -> bool:
    lo, hi = wilson_interval(int(round(point * trials)), trials, z)
    return lo <= value <= hi


def binomial_sigma(p: float, trials: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / trials)


def mean_estimate(total: float, total_sq: float, count: int, seed=None, z: float = Z95, **extra) -> Estimate:
    """Normal-approximation interval from running sums."""
    if count <= 0:
        raise ValueError("no observations")
    mean = total / count
    var = max(total_sq / count - mean * mean, 0.0)
    if count > 1:
        var *= count / (count - 1)
    half = z * math.sqrt(var / count)
    return Estimate(mean, mean - half, mean + half, count, seed, dict(extra))
