"""Rendezvous codes: constructions, concatenation and exhaustive verification.

A rendezvous code is a set of equal-length walk schedules such that for every
ordered pair of distinct rows (x, y) there are n steps on which y sits at one
vertex while x visits every vertex exactly once.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from rendezvous.core import DomainError, WalkSchedule


@dataclass(frozen=True, eq=False)
class RendezvousCode:
    n: int
    rows: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        rows = np.array(self.rows, dtype=np.int64, copy=True)
        if rows.ndim != 2 or rows.shape[0] < 1:
            raise DomainError("a code needs at least one row")
        if rows.size and (rows.min() < 0 or rows.max() > self.n):
            raise DomainError(f"labels must lie in 0..{self.n}")
        canon = np.where(rows == 0, self.n, rows)
        if len({r.tobytes() for r in canon}) != rows.shape[0]:
            raise DomainError("code rows must be pairwise distinct")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @property
    def T(self) -> int:
        return self.rows.shape[1]

    @property
    def size(self) -> int:
        return self.rows.shape[0]

    def __len__(self):
        return self.size

    def schedules(self) -> list:
        return [WalkSchedule(self.n, tuple(r.tolist())) for r in self.rows]

    def canonical_rows(self) -> np.ndarray:
        return np.where(self.rows == 0, self.n, self.rows)

    def to_json(self) -> dict:
        return {"n": self.n, "T": self.T, "rows": self.rows.tolist(), "meta": dict(self.meta)}

    @classmethod
    def from_json(cls, data: dict) -> "RendezvousCode":
        code = cls(int(data["n"]), np.asarray(data["rows"]), dict(data.get("meta", {"kind": "custom"})))
        if "T" in data and int(data["T"]) != code.T:
            raise DomainError("declared T does not match row length")
        return code

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def _binary_rows(d: int) -> np.ndarray:
    n = 1 << d
    T = 4 * n
    s = d + 2
    t = np.arange(T, dtype=np.int64)
    rows = np.zeros((s, T), dtype=np.int64)
    top = (1 << (d + 1)) - 1
    for i in range(s):
        p = s - 1 - i  # bit position of the i-th most significant bit
        on = (t >> p) & 1 == 1
        w = ((t >> (p + 1)) << p) | (t & ((1 << p) - 1))
        rows[i] = np.where(on, np.minimum(w, top - w) + 1, 0)
    return rows


@lru_cache(maxsize=32)
def build_binary_code(d: int) -> RendezvousCode:
    """The (d+2)-row code of length 4n on n = 2^d labels built from binary counting."""
    if d < 1:
        raise DomainError("d must be at least 1")
    return RendezvousCode(1 << d, _binary_rows(d), {"kind": "binary", "d": d})


def padded_parameters(n: int) -> tuple:
    d = -(-((n - 1).bit_length()) // 2)  # ceil(log2(n) / 2)
    k = -(-n // (1 << d))
    return d, k


@lru_cache(maxsize=64)
def build_padded_code(n: int, d: Optional[int] = None, k: Optional[int] = None) -> RendezvousCode:
    """Code for arbitrary n: k shifted copies of the binary code, labels above n set to 0."""
    if d is None and k is None:
        if n < 4:
            raise DomainError("padded codes need n >= 4")
        d, k = padded_parameters(n)
    elif d is None or k is None:
        raise DomainError("give both d and k or neither")
    if d < 1 or k < 1 or k * (1 << d) < n:
        raise DomainError(f"need k * 2^d >= n (got d={d}, k={k}, n={n})")
    base = _binary_rows(d)
    blocks = [np.where(base > 0, base + c * (1 << d), 0) for c in range(k)]
    rows = np.concatenate(blocks, axis=1)
    rows[rows > n] = 0
    return RendezvousCode(n, rows, {"kind": "padded", "n": n, "d": d, "k": k})


def _base_b_rows(A: int, B: int, k: int) -> np.ndarray:
    T = B ** (k + 1)
    block = B ** (k - 1)
    t = np.arange(T, dtype=np.int64)
    digits = np.stack([(t // B ** (k - i)) % B for i in range(k + 1)])
    weights = B ** np.arange(k - 1, -1, -1, dtype=np.int64)
    rows = np.zeros((k + 1, T), dtype=np.int64)
    for i in range(k + 1):
        rest = np.delete(digits, i, axis=0)
        rep = (rest - rest[0]) % B  # class representative has leading digit 0
        ell = rep.T @ weights + 1
        m = digits[i]
        wander = (m >= 1) & (m <= B - A)
        rows[i] = np.where(wander, (m - 1) * block + ell, 0)
    return rows


@lru_cache(maxsize=64)
def build_base_b_code(A: int, B: int, k: int, shuffle_seed: Optional[int] = None) -> RendezvousCode:
    """Base-B code on n = (B-A) B^(k-1) labels, length B^(k+1), waiting fraction A/B."""
    if not (0 < A < B):
        raise DomainError("need 0 < A < B")
    if k < 2:
        raise DomainError("need k >= 2")
    n = (B - A) * B ** (k - 1)
    rows = _base_b_rows(A, B, k)
    meta = {"kind": "baseB", "A": A, "B": B, "k": k}
    if shuffle_seed is not None:
        rows = rows[:, np.random.default_rng(shuffle_seed).permutation(rows.shape[1])]
        meta["shuffle_seed"] = shuffle_seed
    return RendezvousCode(n, rows, meta)


def shuffle_columns(code: RendezvousCode, seed: int) -> RendezvousCode:
    order = np.random.default_rng(seed).permutation(code.T)
    return RendezvousCode(code.n, code.rows[:, order], {"kind": "custom", "base": dict(code.meta), "shuffle_seed": seed})


def concatenate_codes(r1: RendezvousCode, r2: RendezvousCode) -> RendezvousCode:
    """All rows r1 + r2 (row-major in r1), a code whenever both inputs are."""
    if r1.n != r2.n:
        raise DomainError("codes must share n")
    rows = np.concatenate(
        [np.repeat(r1.rows, r2.size, axis=0), np.tile(r2.rows, (r1.size, 1))], axis=1
    )
    return RendezvousCode(r1.n, rows, {"kind": "concat", "parts": [dict(r1.meta), dict(r2.meta)]})


@dataclass(frozen=True)
class PairResult:
    i: int
    j: int
    ok: bool
    label: Optional[int] = None  # y's constant canonical label
    steps: tuple = ()  # 1-based witness steps, one per label of x
    missing: Optional[int] = None  # a canonical label of x absent while y waits

    def to_json(self) -> dict:
        return {"i": self.i, "j": self.j, "ok": self.ok, "label": self.label,
                "steps": list(self.steps), "missing": self.missing}


@dataclass(frozen=True)
class CodeWitness:
    pairs: tuple

    @property
    def valid(self) -> bool:
        return all(p.ok for p in self.pairs)

    def violations(self) -> list:
        return [p for p in self.pairs if not p.ok]

    def first_violation(self) -> Optional[PairResult]:
        bad = self.violations()
        return bad[0] if bad else None


def _check_pair(cx: np.ndarray, cy: np.ndarray, n: int, i: int, j: int) -> PairResult:
    counts = np.bincount(cy, minlength=n + 1)
    candidates = [int(v) for v in np.argsort(-counts, kind="stable") if counts[v] >= n]
    missing = None
    for label in candidates:
        where = np.flatnonzero(cy == label)
        xs = cx[where]
        seen = np.zeros(n + 1, dtype=bool)
        seen[xs] = True
        if seen[1:].all():
            # first occurrence of each x label among y's waiting steps
            _, first = np.unique(xs, return_index=True)
            steps = tuple(sorted(int(where[f]) + 1 for f in first))
            return PairResult(i, j, True, label, steps)
        if missing is None:
            missing = int(np.flatnonzero(~seen[1:])[0]) + 1
    return PairResult(i, j, False, candidates[0] if candidates else None, (), missing)


def verify_rendezvous_code(code: RendezvousCode) -> CodeWitness:
    """Exhaustive check of every ordered pair of distinct rows, in row-pair order."""
    canon = code.canonical_rows()
    results = []
    for i in range(code.size):
        for j in range(code.size):
            if i != j:
                results.append(_check_pair(canon[i], canon[j], code.n, i, j))
    return CodeWitness(tuple(results))


def build_from_meta(meta: dict) -> RendezvousCode:
    kind = meta.get("kind")
    if kind == "binary":
        return build_binary_code(int(meta["d"]))
    if kind == "padded":
        return build_padded_code(int(meta["n"]), meta.get("d"), meta.get("k"))
    if kind == "baseB":
        seed = meta.get("shuffle_seed")
        return build_base_b_code(int(meta["A"]), int(meta["B"]), int(meta["k"]), None if seed is None else int(seed))
    raise DomainError(f"cannot rebuild code of kind {kind!r}")
