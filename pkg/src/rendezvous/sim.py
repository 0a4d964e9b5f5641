"""Seeded Monte Carlo engine for failure probabilities and meeting times.

Trials are grouped in fixed-size batches. Batch b draws from three generators
keyed by (seed, b, stream) with streams player 1, player 2 and adversary, so a
batch's outcome depends only on the configuration and b. Batches may run on any
number of threads; results are folded in batch order, which makes every
estimate bit-for-bit reproducible regardless of the thread count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import Optional, Sequence

import numpy as np

from rendezvous import kernels
from rendezvous.core import DomainError
from rendezvous.graphs import Graph, GraphStrategy, parse_graph, parse_graph_strategy
from rendezvous.stats import Estimate, mean_estimate, proportion_estimate
from rendezvous.strategies import Strategy, WaitForMommy, parse_strategy

PLAYER1, PLAYER2, ADVERSARY = 0, 1, 2
CENSOR_FACTOR = 20
UNRELIABLE_CENSORING = 0.10
NOT_MET = np.iinfo(np.int64).max


def stream(seed: int, batch: int, tag: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(batch, tag))))


def derive_seed(seed: int, *key: int) -> int:
    """A 63-bit seed derived from (seed, key), used for sweep points and recipes."""
    return int(np.random.SeedSequence(int(seed), spawn_key=tuple(key)).generate_state(1, np.uint64)[0] >> np.uint64(1))


def default_threads() -> int:
    return os.cpu_count() or 1


@dataclass(frozen=True)
class SimConfig:
    n: int
    T: int
    trials: int
    seed: int
    strategy: str
    strategy2: Optional[str] = None
    graph: Optional[str] = None
    edge_meeting: bool = False
    distinct_rows_only: bool = False
    threads: Optional[int] = None
    batch_size: Optional[int] = None

    def __post_init__(self):
        if self.trials < 1:
            raise DomainError("trials must be >= 1")
        if self.T < 1:
            raise DomainError("T must be >= 1")
        if self.n < 1:
            raise DomainError("n must be >= 1")
        for name in ("strategy", "strategy2"):
            v = getattr(self, name)
            if v is not None and not isinstance(v, str):
                object.__setattr__(self, name, v.describe())

    def to_json(self) -> dict:
        d = asdict(self)
        d.pop("threads")  # results do not depend on it
        d["batch_size"] = self.resolved_batch_size()
        return d

    def resolved_batch_size(self) -> int:
        if self.batch_size:
            return int(self.batch_size)
        return int(min(16384, max(256, (1 << 21) // max(self.n, 1))))

    def players(self):
        if self.graph is not None:
            return parse_graph_strategy(self.strategy), parse_graph_strategy(self.strategy2 or self.strategy)
        s1 = parse_strategy(self.strategy)
        if self.strategy2 is not None:
            return s1, parse_strategy(self.strategy2)
        if isinstance(s1, WaitForMommy):
            # the asymmetric baseline: one waiter, one wanderer
            return WaitForMommy("waiter"), WaitForMommy("wanderer")
        return s1, s1


@dataclass
class _BatchResult:
    times: np.ndarray  # meeting time per trial, NOT_MET if none within the horizon
    excluded: np.ndarray  # trials dropped by ``distinct_rows_only``


def _vertex_table(table: np.ndarray, n: int) -> np.ndarray:
    return ((table.astype(np.int32) - 1) % n).astype(np.int32)


def _run_complete_batch(cfg: SimConfig, s1: Strategy, s2: Strategy, horizon: int, b: int, size: int) -> _BatchResult:
    n = cfg.n
    r1, r2, ra = stream(cfg.seed, b, PLAYER1), stream(cfg.seed, b, PLAYER2), stream(cfg.seed, b, ADVERSARY)
    perm = kernels.random_permutations(ra, size, n)
    times = np.full(size, NOT_MET, dtype=np.int64)
    excluded = np.zeros(size, dtype=bool)
    alive = np.arange(size)
    done, index = 0, 0
    while done < horizon and alive.size:
        g1 = s1.sample_segment(r1, alive.size, n, index)
        g2 = s2.sample_segment(r2, alive.size, n, index)
        if g1.length != g2.length:
            raise DomainError("the two strategies use different segment lengths")
        if index == 0 and cfg.distinct_rows_only:
            if g1.rows is None or g2.rows is None:
                raise DomainError("distinct_rows_only needs code-type strategies")
            excluded[alive] = g1.rows == g2.rows
        L = min(g1.length, horizon - done)
        hit = kernels.first_hit(_vertex_table(g1.table, n), g1.idx, _vertex_table(g2.table, n), g2.idx,
                                perm[alive], L)
        met = hit >= 0
        times[alive[met]] = done + hit[met] + 1
        alive = alive[~met]
        done += L
        index += 1
    return _BatchResult(times, excluded)


def _run_graph_batch(cfg: SimConfig, G: Graph, s1: GraphStrategy, s2: GraphStrategy, horizon: int, b: int,
                     size: int) -> _BatchResult:
    r1, r2, ra = stream(cfg.seed, b, PLAYER1), stream(cfg.seed, b, PLAYER2), stream(cfg.seed, b, ADVERSARY)
    maps = G.sample_automorphism_maps(ra, size)
    st1, st2 = s1.start(r1, size, G), s2.start(r2, size, G)
    times = np.full(size, NOT_MET, dtype=np.int64)
    px = np.zeros(size, dtype=np.int32)
    py = np.zeros(size, dtype=np.int32)
    alive = np.arange(size)
    done, index = 0, 0
    while done < horizon and alive.size:
        sx = s1.segment(None if st1 is None else st1[alive], r1, px[alive], index, G)
        sy = s2.segment(None if st2 is None else st2[alive], r2, py[alive], index, G)
        L = min(sx.shape[1], sy.shape[1], horizon - done)
        xs = np.concatenate([px[alive, None], sx[:, :L]], axis=1)
        ys = np.concatenate([py[alive, None], sy[:, :L]], axis=1)
        hit = kernels.first_hit_walk(xs, ys, maps[alive], cfg.edge_meeting, index == 0)
        met = hit >= 0
        # a meeting at column c is at move index done + c (column 0 is the start)
        times[alive[met]] = done + hit[met]
        px[alive] = xs[:, -1]
        py[alive] = ys[:, -1]
        alive = alive[~met]
        done += L
        index += 1
    return _BatchResult(times, np.zeros(size, dtype=bool))


def run_trials(cfg: SimConfig, horizon: Optional[int] = None) -> _BatchResult:
    """Meeting times of all trials up to ``horizon`` (default cfg.T), folded in batch order."""
    horizon = cfg.T if horizon is None else horizon
    s1, s2 = cfg.players()
    bs = cfg.resolved_batch_size()
    nb = -(-cfg.trials // bs)
    sizes = [min(bs, cfg.trials - i * bs) for i in range(nb)]
    if cfg.graph is not None:
        G = parse_graph(cfg.graph)
        if G.n != cfg.n:
            raise DomainError(f"graph has {G.n} vertices but n = {cfg.n}")
        s1.check(G)
        s2.check(G)
        work = lambda i: _run_graph_batch(cfg, G, s1, s2, horizon, i, sizes[i])
    else:
        if s1.symmetric != s2.symmetric or (s1 is s2 and not s1.symmetric):
            raise DomainError("asymmetric strategies must be paired explicitly")
        s1.check_n(cfg.n)
        s2.check_n(cfg.n)
        work = lambda i: _run_complete_batch(cfg, s1, s2, horizon, i, sizes[i])
    threads = cfg.threads or default_threads()
    if threads <= 1 or nb == 1:
        parts = [work(i) for i in range(nb)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, range(nb)))
    return _BatchResult(np.concatenate([p.times for p in parts]), np.concatenate([p.excluded for p in parts]))


def _failure_from(res: _BatchResult, T: int, cfg: SimConfig) -> Estimate:
    keep = ~res.excluded
    trials = int(keep.sum())
    if trials == 0:
        raise DomainError("every trial was excluded")
    fails = int((res.times[keep] > T).sum())
    extra = {"T": T, "n": cfg.n}
    if cfg.distinct_rows_only:
        extra["excluded"] = int(res.excluded.sum())
        extra["unconditional_failure"] = float((res.times > T).mean())
    return proportion_estimate(fails, trials, cfg.seed, **extra)


def estimate_failure(cfg: SimConfig) -> Estimate:
    return _failure_from(run_trials(cfg), cfg.T, cfg)


def failure_curve(cfg: SimConfig, T_values: Sequence[int]) -> list:
    """Failure estimates at several horizons from a single run to max(T_values)."""
    res = run_trials(cfg, max(T_values))
    return [_failure_from(res, int(T), cfg) for T in T_values]


def _mean_of(times: np.ndarray, seed, cap: int, **extra) -> Estimate:
    met = times != NOT_MET
    censored = int((~met).sum())
    frac = censored / times.size
    obs = times[met].astype(np.float64)
    if obs.size == 0:
        raise DomainError("no trial met before the censoring cap")
    return mean_estimate(float(obs.sum()), float((obs * obs).sum()), int(obs.size), seed, cap=cap,
                         censored=censored, censored_fraction=frac,
                         unreliable=bool(frac > UNRELIABLE_CENSORING), **extra)


def estimate_expected_time(cfg: SimConfig, cap: Optional[int] = None) -> Estimate:
    """Mean meeting time over trials that meet before the cap (default 20n).

    Censored trials are counted in ``extra`` and the result is flagged
    unreliable when more than 10% are censored.
    """
    cap = CENSOR_FACTOR * cfg.n if cap is None else cap
    res = run_trials(cfg, cap)
    keep = ~res.excluded
    extra = {"n": cfg.n}
    if cfg.distinct_rows_only:
        extra["excluded"] = int(res.excluded.sum())
        un = _mean_of(res.times, cfg.seed, cap)
        extra["unconditional_mean"] = un.point
        extra["unconditional_censored"] = un.extra["censored"]
    return _mean_of(res.times[keep], cfg.seed, cap, **extra)


SWEEP_AXES = ("T", "T/n", "theta", "n", "trials")


def _point_config(cfg: SimConfig, axis: str, value, seed: int) -> SimConfig:
    if axis == "T":
        return replace(cfg, T=int(value), seed=seed)
    if axis == "T/n":
        return replace(cfg, T=int(round(float(value) * cfg.n)), seed=seed)
    if axis == "n":
        return replace(cfg, n=int(value), seed=seed)
    if axis == "trials":
        return replace(cfg, trials=int(value), seed=seed)
    if axis == "theta":
        s = parse_strategy(cfg.strategy)
        if not hasattr(s, "theta"):
            raise DomainError("theta sweeps need an aw strategy")
        return replace(cfg, strategy=replace(s, theta=float(value)).describe(), seed=seed)
    raise DomainError(f"unknown sweep axis {axis!r}; choose from {', '.join(SWEEP_AXES)}")


@dataclass(frozen=True)
class SweepRow:
    param: object
    estimate: Estimate

    def csv_row(self) -> list:
        e = self.estimate
        return [self.param, repr(e.point), repr(e.ci_low), repr(e.ci_high), e.trials, e.seed]


SWEEP_HEADER = ["param", "point", "ci_low", "ci_high", "trials", "seed"]


def sweep(cfg: SimConfig, axis: str, grid: Sequence) -> list:
    if not len(grid):
        raise DomainError("empty sweep grid")
    rows = []
    for i, value in enumerate(grid):
        pc = _point_config(cfg, axis, value, derive_seed(cfg.seed, i))
        rows.append(SweepRow(value, estimate_failure(pc)))
    return rows
