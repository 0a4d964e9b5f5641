"""Exact failure probabilities through permanents of residual 0/1 matrices.

Each joint step (x_t, y_t) zeroes entry (x_t, y_t) of an all-ones n x n matrix;
the players have not met after T steps exactly when the hidden permutation
misses every zero, so Pr[tau > T] = Perm(M) / n!.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from rendezvous import kernels
from rendezvous.core import CapacityError, DomainError, WalkSchedule, canonical
from rendezvous.stats import Estimate, proportion_estimate


@dataclass(frozen=True)
class ResidualMatrix:
    m: int
    zeroes: frozenset

    def __post_init__(self):
        zs = frozenset((int(r), int(c)) for r, c in self.zeroes)
        for r, c in zs:
            if not (0 <= r < self.m and 0 <= c < self.m):
                raise DomainError(f"zero ({r}, {c}) outside a {self.m} x {self.m} matrix")
        object.__setattr__(self, "zeroes", zs)

    @property
    def kappa(self) -> int:
        """Largest number of zeroes in any row or column."""
        if not self.zeroes:
            return 0
        rows = np.bincount([r for r, _ in self.zeroes], minlength=self.m)
        cols = np.bincount([c for _, c in self.zeroes], minlength=self.m)
        return int(max(rows.max(), cols.max()))

    def to_dense(self) -> np.ndarray:
        a = np.ones((self.m, self.m), dtype=np.int64)
        for r, c in self.zeroes:
            a[r, c] = 0
        return a

    def zero_mask(self) -> np.ndarray:
        mask = np.zeros((self.m, self.m), dtype=bool)
        for r, c in self.zeroes:
            mask[r, c] = True
        return mask

    def transpose(self) -> "ResidualMatrix":
        return ResidualMatrix(self.m, frozenset((c, r) for r, c in self.zeroes))


@dataclass(frozen=True)
class ExactProbability:
    numerator: int
    denominator: int

    def __post_init__(self):
        if self.denominator <= 0 or not (0 <= self.numerator <= self.denominator):
            raise DomainError("probability must lie in [0, 1]")

    @property
    def value(self) -> Fraction:
        return Fraction(self.numerator, self.denominator)

    def __float__(self):
        return self.numerator / self.denominator

    def to_json(self) -> dict:
        v = self.value
        return {"numerator": v.numerator, "denominator": v.denominator, "value": float(v)}

    @classmethod
    def from_fraction(cls, f: Fraction) -> "ExactProbability":
        return cls(f.numerator, f.denominator)


def permanent(M: ResidualMatrix) -> int:
    """Exact permanent (Ryser, Gray-code order) of the matrix with zeroes at M.zeroes."""
    if M.m > kernels.MAX_EXACT_PERMANENT:
        raise CapacityError(
            f"exact permanent limited to m <= {kernels.MAX_EXACT_PERMANENT}; "
            "use avoidance_probability_estimate for larger matrices"
        )
    return kernels.permanent01(M.to_dense())


def residual_matrix(x: WalkSchedule, y: WalkSchedule, T: int) -> ResidualMatrix:
    if x.n != y.n:
        raise DomainError("schedules disagree on n")
    if T < 0 or T > min(len(x), len(y)):
        raise DomainError(f"T={T} outside 0..{min(len(x), len(y))}")
    n = x.n
    zs = {(canonical(x[t], n) - 1, canonical(y[t], n) - 1) for t in range(T)}
    return ResidualMatrix(n, frozenset(zs))


def exact_pair_failure(x: WalkSchedule, y: WalkSchedule, T: int) -> ExactProbability:
    M = residual_matrix(x, y, T)
    return ExactProbability(permanent(M), math.factorial(M.m))


def _as_fraction(p) -> Fraction:
    if isinstance(p, Fraction):
        return p
    if isinstance(p, float):
        return Fraction(p).limit_denominator(10**12)
    return Fraction(p)


def exact_strategy_failure(support: Iterable, T: int) -> ExactProbability:
    """Failure probability of the symmetric strategy drawing both schedules from ``support``.

    ``support`` is a sequence of (WalkSchedule, probability) pairs or a
    ``FiniteSupport`` strategy. Probabilities must sum to exactly 1.
    """
    if hasattr(support, "weighted_schedules"):
        support = support.weighted_schedules()
    items = [(x, _as_fraction(p)) for x, p in support]
    if not items:
        raise DomainError("empty support")
    if sum(p for _, p in items) != 1:
        raise DomainError("probabilities must sum to 1")
    if any(p < 0 for _, p in items):
        raise DomainError("negative probability")
    total = Fraction(0)
    for a, (x, px) in enumerate(items):
        for b in range(a, len(items)):
            y, py = items[b]
            f = exact_pair_failure(x, y, T).value
            # Perm(M^T) = Perm(M), so swapping the players gives the same value
            total += px * py * f * (1 if a == b else 2)
    return ExactProbability.from_fraction(total)


def avoidance_probability_estimate(M: ResidualMatrix, samples: int, rng: np.random.Generator,
                                   batch_elems: int = 1 << 22) -> Estimate:
    """Fraction of uniform permutations pi with pi(c) != r for every zero (r, c), Wilson 95%."""
    if samples < 1:
        raise DomainError("samples must be >= 1")
    if not M.zeroes:
        return Estimate(1.0, 1.0, 1.0, samples)
    cols = np.array(sorted({c for _, c in M.zeroes}), dtype=np.int64)
    zmask = M.zero_mask()
    r = len(cols)
    batch = max(1, batch_elems // r)
    good = 0
    done = 0
    while done < samples:
        size = min(batch, samples - done)
        offsets = kernels.draw_fy_offsets(rng, size, M.m, r)
        good += kernels.count_avoiding(offsets, cols, zmask)
        done += size
    return proportion_estimate(good, samples, kappa=M.kappa, zeroes=len(M.zeroes), m=M.m)


def random_zero_set(m: int, size: int, kappa: int, rng: np.random.Generator) -> ResidualMatrix:
    """Uniformly placed distinct zeroes with at most ``kappa`` per row and column."""
    if size > m * kappa:
        raise DomainError("too many zeroes for the row/column cap")
    rows = np.zeros(m, dtype=np.int64)
    cols = np.zeros(m, dtype=np.int64)
    chosen = set()
    while len(chosen) < size:
        r, c = (int(v) for v in rng.integers(0, m, 2))
        if (r, c) in chosen or rows[r] >= kappa or cols[c] >= kappa:
            continue
        chosen.add((r, c))
        rows[r] += 1
        cols[c] += 1
    return ResidualMatrix(m, frozenset(chosen))


def schedules_from_rows(rows: Sequence, n: int) -> list:
    return [WalkSchedule(n, tuple(int(v) for v in r)) for r in rows]
