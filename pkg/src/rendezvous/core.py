"""Labels, walk schedules, permutations, rendezvous time and derangement counts.

Vertices of the complete graph carry labels 1..n. Label 0 is another name for
label n, used for a player's "frequent" (waiting) location. Steps are 1-indexed:
a meeting at the very first step has tau = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

#: largest n for which derangement probabilities are returned as exact fractions
EXACT_LIMIT = 64


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class CapacityError(DomainError):
    """An exact computation was requested beyond its supported size."""


def canonical(label: int, n: int) -> int:
    """Map label 0 to its alias n; other labels are unchanged."""
    label = int(label)
    if label < 0 or label > n:
        raise DomainError(f"label {label} outside 0..{n}")
    return n if label == 0 else label


def to_vertex_index(labels, n: int) -> np.ndarray:
    """Vectorised ``canonical(label) - 1``: labels 0..n to 0-based vertex indices."""
    arr = np.asarray(labels, dtype=np.int64)
    if arr.size and (arr.min() < 0 or arr.max() > n):
        raise DomainError(f"labels must lie in 0..{n}")
    return (arr - 1) % n


@dataclass(frozen=True)
class WalkSchedule:
    n: int
    steps: tuple

    def __post_init__(self):
        steps = tuple(int(s) for s in self.steps)
        object.__setattr__(self, "steps", steps)
        if self.n < 1:
            raise DomainError("n must be positive")
        for s in steps:
            if s < 0 or s > self.n:
                raise DomainError(f"label {s} outside 0..{self.n}")

    def __len__(self):
        return len(self.steps)

    def __getitem__(self, i):
        return self.steps[i]

    def canonical_steps(self) -> tuple:
        return tuple(self.n if s == 0 else s for s in self.steps)

    def to_json(self) -> list:
        return list(self.steps)

    @classmethod
    def from_json(cls, data, n: int) -> "WalkSchedule":
        return cls(n, tuple(data))


@dataclass(frozen=True)
class Permutation:
    """A bijection on 1..n stored as its 1-based images."""

    n: int
    images: tuple

    def __post_init__(self):
        images = tuple(int(v) for v in self.images)
        object.__setattr__(self, "images", images)
        if len(images) != self.n or sorted(images) != list(range(1, self.n + 1)):
            raise DomainError("images must be a permutation of 1..n")

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(n, tuple(range(1, n + 1)))

    def __call__(self, label: int) -> int:
        return self.images[canonical(label, self.n) - 1]

    def fixed_points(self) -> int:
        return sum(1 for i, v in enumerate(self.images, start=1) if i == v)

    def inverse(self) -> "Permutation":
        inv = [0] * self.n
        for i, v in enumerate(self.images, start=1):
            inv[v - 1] = i
        return Permutation(self.n, tuple(inv))

    def to_json(self) -> list:
        return list(self.images)

    @classmethod
    def from_json(cls, data) -> "Permutation":
        return cls(len(data), tuple(data))


@dataclass(frozen=True)
class MeetingRecord:
    met: bool
    tau: Optional[int] = None

    def __post_init__(self):
        if self.met != (self.tau is not None):
            raise DomainError("tau must be present exactly when met")


def rendezvous_time(x: WalkSchedule, y: WalkSchedule, pi: Permutation) -> MeetingRecord:
    """First step t with canonical(x_t) = pi(canonical(y_t))."""
    if not (x.n == y.n == pi.n):
        raise DomainError("schedules and permutation disagree on n")
    n = x.n
    for t, (a, b) in enumerate(zip(x.steps, y.steps), start=1):
        if canonical(a, n) == pi(b):
            return MeetingRecord(True, t)
    return MeetingRecord(False)


def count_derangements(n: int) -> int:
    """Subfactorial D_n = n! * sum_{k<=n} (-1)^k / k!, exact."""
    if n < 0:
        raise DomainError("n must be non-negative")
    total = 0
    term = 1  # n!/k! for k = n, n-1, ..., 0
    for k in range(n, -1, -1):
        total += term if k % 2 == 0 else -term
        term *= k if k > 0 else 1
    return total


def derangement_probability(n: int):
    """D_n / n!: an exact ``Fraction`` for n <= 64, a float beyond."""
    if n <= EXACT_LIMIT:
        return Fraction(count_derangements(n), math.factorial(n))
    # the alternating series has converged to double precision long before n = 64
    total, term = 0.0, 1.0
    for k in range(0, 40):
        if k:
            term /= k
        total += term if k % 2 == 0 else -term
    return total


def log_factorial(n: int) -> float:
    return math.lgamma(n + 1)


def sample_uniform_permutation(n: int, rng: np.random.Generator) -> Permutation:
    """Uniform permutation of 1..n; deterministic given the generator state."""
    if n < 1:
        raise DomainError("n must be positive")
    return Permutation(n, tuple(int(v) + 1 for v in rng.permutation(n)))


def as_schedule(steps: Sequence[int] | WalkSchedule, n: int) -> WalkSchedule:
    if isinstance(steps, WalkSchedule):
        if steps.n != n:
            raise DomainError("schedule has a different n")
        return steps
    return WalkSchedule(n, tuple(steps))
