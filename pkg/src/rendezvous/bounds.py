"""Closed-form lower bounds, the waiting/wandering step classifier, the
expected-time integrals, and the submodular objective used in the optimality
argument for short horizons.

Every asymptotic bound is returned without its vanishing correction term;
comparisons against finite-n numbers must carry their own allowance.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from rendezvous.core import DomainError, WalkSchedule
from rendezvous.strategies import aw_optimal_failure_ratio


def _pos(v: float) -> float:
    return v if v > 0 else 0.0


# ---------------------------------------------------------------------------
# Step classification
# ---------------------------------------------------------------------------


def is_frequent_count(count, n: int):
    """count > n^(2/3), evaluated exactly as count^3 > n^2."""
    if np.ndim(count) == 0:
        return int(count) ** 3 > n * n
    c = np.asarray(count, dtype=object)
    return np.vectorize(lambda v: v ** 3 > n * n, otypes=[bool])(c)


def classify_steps(x: WalkSchedule, T: int) -> np.ndarray:
    """Boolean array over the first T steps, True where the step is a waiting step."""
    if T < 0 or T > len(x):
        raise DomainError(f"T={T} outside 0..{len(x)}")
    steps = np.asarray(x.canonical_steps()[:T], dtype=np.int64)
    if T == 0:
        return np.zeros(0, dtype=bool)
    counts = np.bincount(steps, minlength=x.n + 1)
    frequent = is_frequent_count(counts, x.n)
    return frequent[steps]


def waiting_counts_of_rows(rows: np.ndarray, n: int, T: int) -> np.ndarray:
    """Number of waiting steps in the first T columns of each row of a label table."""
    out = np.empty(rows.shape[0], dtype=np.int64)
    for i, r in enumerate(rows):
        out[i] = int(classify_steps(WalkSchedule(n, tuple(int(v) for v in r)), T).sum())
    return out


# ---------------------------------------------------------------------------
# Profiles and per-pair bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ABCDProfile:
    """Step counts: both wait (a), only y waits (b), only x waits (c), both wander (d)."""

    a: int
    b: int
    c: int
    d: int
    T: Optional[int] = None

    def __post_init__(self):
        if min(self.a, self.b, self.c, self.d) < 0:
            raise DomainError("step counts must be non-negative")
        total = self.a + self.b + self.c + self.d
        if self.T is None:
            object.__setattr__(self, "T", total)
        elif self.T != total:
            raise DomainError(f"a+b+c+d = {total} differs from T = {self.T}")

    @classmethod
    def from_schedules(cls, x: WalkSchedule, y: WalkSchedule, T: int) -> "ABCDProfile":
        wx = classify_steps(x, T)
        wy = classify_steps(y, T)
        return cls(int((wx & wy).sum()), int((~wx & wy).sum()), int((wx & ~wy).sum()),
                   int((~wx & ~wy).sum()), T)


def abcd_lower_bound(p: ABCDProfile, n: int) -> float:
    return _pos(1 - p.b / n) * _pos(1 - p.c / n) * math.exp(-p.d / n)


def abcd_minimum(T: int, n: int) -> float:
    """Smallest value of the a,b,c,d bound over all profiles with a+b+c+d = T.

    Each factor decreases when a step moves into b or c, and for b + c fixed the
    product is smallest at an extreme split, giving (1 - T/n)^+.
    """
    return _pos(1 - T / n)


@dataclass(frozen=True)
class DetailedProfile:
    b: tuple  # distinct rare labels of x seen while y waits at its i-th frequent label
    c: tuple
    d_prime: int

    def __post_init__(self):
        object.__setattr__(self, "b", tuple(int(v) for v in self.b))
        object.__setattr__(self, "c", tuple(int(v) for v in self.c))
        if min(self.b + self.c + (self.d_prime,), default=0) < 0:
            raise DomainError("counts must be non-negative")

    @property
    def k(self) -> int:
        return len(self.b)

    @property
    def l(self) -> int:
        return len(self.c)


def detailed_failure(p: DetailedProfile, n: int) -> float:
    for v in p.b + p.c:
        if v > n:
            raise DomainError("distinct label counts cannot exceed n")
    out = math.exp(-p.d_prime / n)
    for v in p.b + p.c:
        out *= 1 - v / n
    return out


def detailed_minimum(b: int, c: int, d: int, n: int) -> float:
    """Minimiser of the detailed product under sum(b_i) <= b, sum(c_j) <= c, d' <= d."""
    return detailed_failure(DetailedProfile((min(b, n),), (min(c, n),), d), n)


# ---------------------------------------------------------------------------
# Strategy-level lower bounds
# ---------------------------------------------------------------------------


def uniform_bound_general(T: float, n: float) -> float:
    return _pos(math.exp(-T / n) * (1 - T / (2 * n)))


def uniform_bound_equal_wait(T: float, n: float) -> float:
    return math.exp(-T / n) * _pos(1 - T / (4 * n)) ** 2


def four_n_lower_bound(delta: float) -> float:
    if not 0 <= delta <= 4:
        raise DomainError("delta must lie in [0, 4]")
    return math.exp(-4) / 4096 * math.exp(delta / 2) * delta ** 4


def four_n_bound_at(T: float, n: float) -> float:
    """The binning bound at horizon T, zero from T = 4n on."""
    delta = 4 - T / n
    if delta <= 0:
        return 0.0
    return four_n_lower_bound(min(delta, 4.0))


def aw_optimal_or_none(T: float, n: float) -> Optional[float]:
    if T <= 0:
        return 1.0
    if T > n:
        return None
    return aw_optimal_failure_ratio(T / n)


BOUND_COLUMNS = ("T", "eq_abcd_min", "eq_1T2n", "eq_1T4n", "thm5", "aw_opt")


def bounds_table(n: int, T_values: Iterable[int]) -> list:
    rows = []
    for T in T_values:
        aw = aw_optimal_or_none(T, n)
        rows.append({
            "T": int(T),
            "eq_abcd_min": abcd_minimum(T, n),
            "eq_1T2n": uniform_bound_general(T, n),
            "eq_1T4n": uniform_bound_equal_wait(T, n),
            "thm5": four_n_bound_at(T, n),
            "aw_opt": "" if aw is None else aw,
        })
    return rows


# ---------------------------------------------------------------------------
# Expected-time integrals
# ---------------------------------------------------------------------------


def adaptive_simpson(f: Callable[[float], float], a: float, b: float, tol: float = 1e-9,
                     max_depth: int = 50) -> float:
    """Adaptive Simpson quadrature with the usual Richardson correction."""

    def simpson(fa, fm, fb, a, b):
        return (b - a) / 6 * (fa + 4 * fm + fb)

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, a, m)
        right = simpson(fm, frm, fb, m, b)
        diff = left + right - whole
        if depth <= 0 or abs(diff) <= 15 * tol:
            return left + right + diff / 15
        return (recurse(a, m, fa, flm, fm, left, tol / 2, depth - 1)
                + recurse(m, b, fm, frm, fb, right, tol / 2, depth - 1))

    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    return recurse(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, max_depth)


def aw_integrand(t: float) -> float:
    return 1.0 if t == 0 else aw_optimal_failure_ratio(t)


@dataclass(frozen=True)
class ExpectedTimeBounds:
    first_integral: float
    triangle: float

    @property
    def improved(self) -> float:
        return self.first_integral + self.triangle


def expected_time_lower_bound(tol: float = 1e-9) -> ExpectedTimeBounds:
    """Constants c with E[tau] >= c n - o(n): the plain integral and the improved value."""
    first = adaptive_simpson(aw_integrand, 0.0, 1.0, tol)
    e = math.e
    top = (e + 2) / (e + 1)
    tri = adaptive_simpson(lambda t: top - t, 1.0, top, tol)
    return ExpectedTimeBounds(first, tri)


# ---------------------------------------------------------------------------
# Two-waiting-time objective and the submodular set function
# ---------------------------------------------------------------------------


def two_wait_failure(t1: float, t2: float, T: float, n: float) -> float:
    if not (0 <= t1 <= T and 0 <= t2 <= T and T <= n):
        raise DomainError("need 0 <= t1, t2 <= T <= n")
    return (1 - abs(t1 - t2) / n) * math.exp((max(t1, t2) - T) / n)


def submodular_f(X, Y, T: int, n: int) -> float:
    """Per-pair bound as a function of the waiting step sets X and Y within 1..T."""
    if T > n:
        raise DomainError("defined only for T <= n")
    X, Y = frozenset(X), frozenset(Y)
    ground = range(1, T + 1)
    if not (X <= set(ground) and Y <= set(ground)):
        raise DomainError("step sets must lie in 1..T")
    b = len(Y - X)
    c = len(X - Y)
    d = len(X & Y)
    return (1 - b / n) * (1 - c / n) * math.exp(-d / n)


@dataclass(frozen=True)
class MarginalVector:
    x: Mapping

    def __post_init__(self):
        x = {k: float(v) for k, v in dict(self.x).items()}
        for k, v in x.items():
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"marginal of {k!r} outside [0, 1]")
        object.__setattr__(self, "x", x)

    @classmethod
    def of_distribution(cls, dist: Sequence, ground: Iterable) -> "MarginalVector":
        """Expectation of the indicator vector under a list of (subset, prob) pairs."""
        x = {s: 0.0 for s in ground}
        for subset, p in dist:
            for s in subset:
                x[s] += p
        return cls({k: min(1.0, max(0.0, v)) for k, v in x.items()})


def lovasz_extension_sample(x: MarginalVector, rng: np.random.Generator) -> frozenset:
    lam = rng.random()
    # lambda is uniform on [0, 1); treat it as drawn from (0, 1] so x = 0 never selects
    lam = 1.0 - lam
    return frozenset(s for s, v in x.x.items() if v >= lam)


def lovasz_distribution(x: MarginalVector) -> list:
    """Exact chain distribution of ``lovasz_extension_sample``: (subset, probability) pairs."""
    levels = sorted(set(x.x.values()) | {0.0, 1.0})
    out = []
    for lo, hi in zip(levels, levels[1:]):
        # lambda in (lo, hi] selects every s with x(s) >= hi
        subset = frozenset(s for s, v in x.x.items() if v >= hi)
        if hi > lo:
            out.append((subset, hi - lo))
    merged = {}
    for subset, p in out:
        merged[subset] = merged.get(subset, 0.0) + p
    return sorted(merged.items(), key=lambda kv: (len(kv[0]), sorted(kv[0])))


def product_expectation(dist: Sequence, f: Callable) -> float:
    """E[f(X, Y)] for X, Y independent draws from the same finite distribution."""
    return sum(p * q * f(a, b) for (a, p), (b, q) in itertools.product(dist, dist))


def extreme_distribution(mu: float, T: float) -> list:
    """Two-point law on {0, T} with mean mu."""
    if not 0 <= mu <= T:
        raise DomainError("mean must lie in [0, T]")
    p = mu / T if T else 0.0
    return [(0, 1 - p), (T, p)]
