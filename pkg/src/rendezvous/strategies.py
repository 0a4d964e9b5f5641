"""Strategy samplers and the closed-form Anderson-Weber failure formulas.

Samplers produce schedules in *segments*: a block of n steps for Anderson-Weber,
one full code length for code strategies, and so on. A segment for a batch of
players is a label table plus one row index per player, which lets code
strategies share a small table instead of materialising one row per trial.
Labels follow the usual convention (0 is an alias of n).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Optional

import numpy as np

from rendezvous import kernels
from rendezvous.codes import RendezvousCode, build_base_b_code, build_binary_code, build_padded_code
from rendezvous.core import DomainError, WalkSchedule


@dataclass
class Segment:
    table: np.ndarray  # (rows, length) labels in 0..n
    idx: np.ndarray  # (batch,) row of ``table`` used by each player
    rows: Optional[np.ndarray] = None  # code row chosen by each player, if any

    @property
    def length(self) -> int:
        return self.table.shape[1]

    def labels(self) -> np.ndarray:
        return self.table[self.idx]


class Strategy:
    """Base class: a distribution over walk schedules, sampled segment by segment."""

    symmetric = True
    #: strategies drawing a row of a fixed table (codes, finite support)
    row_based = False

    def segment_length(self, n: int) -> int:
        raise NotImplementedError

    def sample_segment(self, rng: np.random.Generator, size: int, n: int, index: int) -> Segment:
        raise NotImplementedError

    def max_horizon(self, n: int) -> Optional[int]:
        return None

    def check_n(self, n: int) -> None:
        pass

    def to_json(self) -> dict:
        raise NotImplementedError

    def describe(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


@dataclass(frozen=True)
class AndersonWeber(Strategy):
    """Per block of n steps: wait at the frequent location w.p. theta, else wander.

    With ``relabel`` the player draws a fresh labelling for every block, so the
    waiting location of each block is a uniformly random vertex instead of
    label 0; this is the repeated-rounds form with independent rounds.
    """

    theta: float
    rounds: Optional[int] = None
    relabel: bool = False

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise DomainError("theta must lie in [0, 1]")
        if self.rounds is not None and self.rounds < 1:
            raise DomainError("rounds must be positive")

    def segment_length(self, n):
        return n

    def max_horizon(self, n):
        return None if self.rounds is None else self.rounds * n

    def sample_segment(self, rng, size, n, index):
        waits = rng.random(size) < self.theta
        table = np.empty((size, n), dtype=np.int32)
        wander = np.flatnonzero(~waits)
        if wander.size:
            table[wander] = kernels.random_permutations(rng, wander.size, n) + 1
        stay = np.flatnonzero(waits)
        if stay.size:
            if self.relabel:
                table[stay] = (rng.integers(0, n, stay.size) + 1)[:, None]
            else:
                table[stay] = 0
        return Segment(table, np.arange(size))

    def to_json(self):
        d = {"kind": "aw", "theta": self.theta}
        if self.rounds is not None:
            d["rounds"] = self.rounds
        if self.relabel:
            d["relabel"] = True
        return d


@dataclass(frozen=True)
class UniformRandom(Strategy):
    """Independent uniform label at every step."""

    def segment_length(self, n):
        return n

    def sample_segment(self, rng, size, n, index):
        table = rng.integers(1, n + 1, size=(size, n), dtype=np.int32)
        return Segment(table, np.arange(size))

    def to_json(self):
        return {"kind": "uniform"}


@dataclass(frozen=True)
class WaitForMommy(Strategy):
    """Asymmetric baseline: the waiter sits at label 0, the wanderer visits every vertex."""

    role: str = "waiter"
    symmetric = False

    def __post_init__(self):
        if self.role not in ("waiter", "wanderer"):
            raise DomainError("role must be 'waiter' or 'wanderer'")

    def segment_length(self, n):
        return n

    def sample_segment(self, rng, size, n, index):
        if self.role == "waiter":
            return Segment(np.zeros((1, n), dtype=np.int32), np.zeros(size, dtype=np.int64))
        return Segment(kernels.random_permutations(rng, size, n) + 1, np.arange(size))

    def to_json(self):
        return {"kind": "wfm", "role": self.role}


class _CodeStrategy(Strategy):
    """Uniform row of a rendezvous code; a fresh row for each further code length.

    With a shuffle seed the columns of segment j are permuted by a permutation
    derived from (seed, j). Both players use the same permutation: it is part of
    the agreed code, not private randomness.
    """

    row_based = True
    shuffle_seed: Optional[int] = None

    @property
    def code(self) -> RendezvousCode:
        raise NotImplementedError

    def check_n(self, n):
        if n != self.code.n:
            raise DomainError(f"strategy is defined for n={self.code.n}, not {n}")

    def segment_length(self, n):
        return self.code.T

    def _table(self, index):
        rows = self.code.rows.astype(np.int32)
        if self.shuffle_seed is None:
            return rows
        order = np.random.default_rng([self.shuffle_seed, index]).permutation(rows.shape[1])
        return np.ascontiguousarray(rows[:, order])

    def sample_segment(self, rng, size, n, index):
        self.check_n(n)
        choice = rng.integers(0, self.code.size, size)
        return Segment(self._table(index), choice, choice)

    def _shuffle_json(self, d):
        if self.shuffle_seed is not None:
            d["shuffle_seed"] = self.shuffle_seed
        return d


@dataclass(frozen=True)
class BinaryCode(_CodeStrategy):
    d: int
    shuffle_seed: Optional[int] = None

    @property
    def code(self):
        return build_binary_code(self.d)

    def to_json(self):
        return self._shuffle_json({"kind": "code", "family": "binary", "d": self.d})


@dataclass(frozen=True)
class PaddedCode(_CodeStrategy):
    n: int
    shuffle_seed: Optional[int] = None

    @property
    def code(self):
        return build_padded_code(self.n)

    def to_json(self):
        return self._shuffle_json({"kind": "code", "family": "padded", "n": self.n})


@dataclass(frozen=True)
class BaseBCode(_CodeStrategy):
    A: int
    B: int
    k: int
    shuffle_seed: Optional[int] = None

    @property
    def code(self):
        return build_base_b_code(self.A, self.B, self.k)

    def to_json(self):
        return self._shuffle_json({"kind": "code", "family": "baseB", "A": self.A, "B": self.B, "k": self.k})


@dataclass(frozen=True, eq=False)
class FiniteSupport(Strategy):
    """Explicit distribution over equal-length schedules."""

    n: int
    schedules: tuple
    probabilities: tuple
    row_based = True

    def __post_init__(self):
        scheds = tuple(tuple(int(v) for v in s) for s in self.schedules)
        probs = tuple(Fraction(p) if not isinstance(p, float) else Fraction(p).limit_denominator(10**12)
                      for p in self.probabilities)
        if not scheds or len(scheds) != len(probs):
            raise DomainError("need one probability per schedule")
        if len({len(s) for s in scheds}) != 1:
            raise DomainError("schedules must have equal length")
        if sum(probs) != 1 or any(p < 0 for p in probs):
            raise DomainError("probabilities must be non-negative and sum to 1")
        for s in scheds:
            WalkSchedule(self.n, s)
        object.__setattr__(self, "schedules", scheds)
        object.__setattr__(self, "probabilities", probs)

    @classmethod
    def uniform(cls, n, schedules):
        schedules = [tuple(s) for s in schedules]
        return cls(n, tuple(schedules), tuple(Fraction(1, len(schedules)) for _ in schedules))

    @cached_property
    def _table(self):
        return np.array(self.schedules, dtype=np.int32)

    @cached_property
    def _p(self):
        p = np.array([float(x) for x in self.probabilities])
        return p / p.sum()

    def check_n(self, n):
        if n != self.n:
            raise DomainError(f"strategy is defined for n={self.n}, not {n}")

    def segment_length(self, n):
        return len(self.schedules[0])

    def sample_segment(self, rng, size, n, index):
        self.check_n(n)
        choice = rng.choice(len(self.schedules), size=size, p=self._p)
        return Segment(self._table, choice, choice)

    def weighted_schedules(self):
        return [(WalkSchedule(self.n, s), p) for s, p in zip(self.schedules, self.probabilities)]

    def to_json(self):
        return {"kind": "finite", "n": self.n, "schedules": [list(s) for s in self.schedules],
                "probabilities": [str(p) for p in self.probabilities]}


def code_strategy_from(code: RendezvousCode) -> FiniteSupport:
    return FiniteSupport.uniform(code.n, [tuple(r) for r in code.rows.tolist()])


def sample_schedule(s: Strategy, n: int, horizon: int, rng: np.random.Generator) -> WalkSchedule:
    """One schedule of the given horizon, built from consecutive segments."""
    if horizon < 1:
        raise DomainError("horizon must be >= 1")
    s.check_n(n)
    parts, have, index = [], 0, 0
    while have < horizon:
        seg = s.sample_segment(rng, 1, n, index)
        parts.append(seg.labels()[0])
        have += seg.length
        index += 1
    steps = np.concatenate(parts)[:horizon]
    return WalkSchedule(n, tuple(steps.tolist()))


# ---------------------------------------------------------------------------
# Descriptor parsing
# ---------------------------------------------------------------------------


def _kv(parts):
    out = {}
    for p in parts:
        for item in p.split(","):
            if not item:
                continue
            if "=" not in item:
                raise DomainError(f"expected key=value, got {item!r}")
            k, v = item.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def strategy_from_json(d: dict) -> Strategy:
    kind = d.get("kind")
    if kind == "aw":
        return AndersonWeber(float(d["theta"]), d.get("rounds"), bool(d.get("relabel", False)))
    if kind == "uniform":
        return UniformRandom()
    if kind == "wfm":
        return WaitForMommy(d.get("role", "waiter"))
    if kind == "finite":
        return FiniteSupport(int(d["n"]), tuple(tuple(s) for s in d["schedules"]),
                             tuple(Fraction(p) for p in d["probabilities"]))
    if kind == "code":
        fam = d.get("family", "binary")
        seed = d.get("shuffle_seed")
        seed = None if seed is None else int(seed)
        if fam == "binary":
            return BinaryCode(int(d["d"]), seed)
        if fam == "padded":
            return PaddedCode(int(d["n"]), seed)
        if fam in ("baseB", "baseb"):
            return BaseBCode(int(d["A"]), int(d["B"]), int(d["k"]), seed)
    raise DomainError(f"unknown strategy descriptor {d!r}")


def parse_strategy(text) -> Strategy:
    """Parse JSON or shorthand such as ``aw:0.2689``, ``code:binary:d=2``, ``uniform``.

    Other shorthands: ``aw:0.249:relabel``, ``code:padded:n=100``,
    ``code:baseB:A=1,B=2,k=11,shuffle_seed=5``, ``wfm:waiter``, ``wfm:wanderer``.
    """
    if isinstance(text, Strategy):
        return text
    if isinstance(text, dict):
        return strategy_from_json(text)
    text = text.strip()
    if text.startswith("{"):
        return strategy_from_json(json.loads(text))
    parts = text.split(":")
    head = parts[0].lower()
    if head == "aw":
        if len(parts) < 2:
            raise DomainError("aw needs a theta, e.g. aw:0.2689")
        extra = [p for p in parts[2:]]
        relabel = "relabel" in extra
        kv = _kv([p for p in extra if p != "relabel"])
        rounds = int(kv["rounds"]) if "rounds" in kv else None
        return AndersonWeber(float(parts[1]), rounds, relabel)
    if head == "uniform":
        return UniformRandom()
    if head == "wfm":
        return WaitForMommy(parts[1] if len(parts) > 1 else "waiter")
    if head == "code":
        fam = parts[1] if len(parts) > 1 else "binary"
        kv = _kv(parts[2:])
        kv["kind"] = "code"
        kv["family"] = fam
        return strategy_from_json(kv)
    raise DomainError(f"cannot parse strategy {text!r}")


# ---------------------------------------------------------------------------
# Closed forms for T <= n
# ---------------------------------------------------------------------------

_SERIES_CUTOFF = 1e-4
_SERIES_TERMS = 10


def _series(coef, u):
    # sum_{k>=1} coef(k) u^(k-1) / k!
    total, fact = 0.0, 1.0
    for k in range(1, _SERIES_TERMS + 1):
        fact *= k
        total += coef(k) * u ** (k - 1) / fact
    return total


def optimal_theta_ratio(u: float) -> float:
    """Minimising waiting probability at T/n = u (0 < u <= 1)."""
    if u < _SERIES_CUTOFF:
        return _series(lambda k: k - 1, u) / _series(lambda k: 2 * k - 1, u)
    # written with expm1 so the leading terms cancel exactly
    e, em1 = math.exp(u), math.expm1(u)
    return (u * e - em1) / (2 * u * e - em1)


def aw_optimal_failure_ratio(u: float) -> float:
    """Minimum over theta of the Anderson-Weber failure at T/n = u (value 1 at u = 0)."""
    if u < _SERIES_CUTOFF:
        return _series(lambda k: -(k * k - 3 * k + 1), u) / _series(lambda k: 2 * k - 1, u)
    e, em1 = math.exp(u), math.expm1(u)
    return (u * (2 - u) * e - em1) / (2 * u * e - em1)


def _check_T(T, n, allow_zero):
    if n <= 0:
        raise DomainError("n must be positive")
    if T > n or T < 0 or (T == 0 and not allow_zero):
        raise DomainError(f"formula derived only for {'0' if allow_zero else '0 <'} T <= n (T={T}, n={n})")


def optimal_theta(T: float, n: float) -> float:
    _check_T(T, n, allow_zero=False)
    return optimal_theta_ratio(T / n)


def aw_optimal_failure(T: float, n: float) -> float:
    _check_T(T, n, allow_zero=False)
    return aw_optimal_failure_ratio(T / n)


@dataclass(frozen=True)
class AWFormulaInput:
    T: float
    n: float
    theta: float

    def __post_init__(self):
        _check_T(self.T, self.n, allow_zero=True)
        if not 0.0 <= self.theta <= 1.0:
            raise DomainError("theta must lie in [0, 1]")


def aw_failure_formula(inp, n=None, theta=None) -> float:
    """theta^2 + 2 theta (1-theta)(1-T/n) + (1-theta)^2 exp(-T/n), asymptotic form."""
    if not isinstance(inp, AWFormulaInput):
        inp = AWFormulaInput(inp, n, theta)
    u = inp.T / inp.n
    th = inp.theta
    return th * th + 2 * th * (1 - th) * (1 - u) + (1 - th) ** 2 * math.exp(-u)
