import math
import os
import subprocess
import sys
from fractions import Fraction

import numpy as np
import pytest

from rendezvous.codes import build_binary_code, build_padded_code
from rendezvous.core import DomainError, derangement_probability
from rendezvous.exact import exact_strategy_failure
from rendezvous.sim import (
    SWEEP_HEADER, SimConfig, derive_seed, estimate_expected_time, estimate_failure, failure_curve, run_trials, sweep,
)
from rendezvous.strategies import FiniteSupport, code_strategy_from


def _half_width(est):
    return (est.ci_high - est.ci_low) / 2


def test_config_validation():
    with pytest.raises(DomainError):
        SimConfig(10, 0, 5, 1, "uniform")
    with pytest.raises(DomainError):
        SimConfig(10, 5, 0, 1, "uniform")


def test_config_json_omits_threads():
    cfg = SimConfig(1024, 4096, 100, 42, "code:binary:d=10", threads=3)
    d = cfg.to_json()
    assert "threads" not in d and d["batch_size"] == 2048


@pytest.mark.parametrize("spec", ["aw:0.3", "code:binary:d=6", "uniform"])
def test_deterministic_across_threads(spec):
    base = SimConfig(64, 200, 20_000, 11, spec, batch_size=1000)
    ests = [estimate_failure(SimConfig(**{**base.__dict__, "threads": t})) for t in (1, 2, 7)]
    assert ests[0] == ests[1] == ests[2]


def test_batches_fold_in_order():
    cfg = SimConfig(32, 64, 3000, 5, "aw:0.25", batch_size=1000, threads=4)
    whole = run_trials(cfg).times
    first = run_trials(SimConfig(32, 64, 1000, 5, "aw:0.25", batch_size=1000, threads=1)).times
    assert np.array_equal(whole[:1000], first)


def test_graph_runs_deterministic():
    cfgs = [SimConfig(60, 120, 20_000, 9, "alpern", graph="cycle:60", edge_meeting=True, threads=t) for t in (1, 5)]
    assert estimate_failure(cfgs[0]) == estimate_failure(cfgs[1])


def test_seed_changes_result():
    a = estimate_failure(SimConfig(64, 64, 20_000, 1, "uniform"))
    b = estimate_failure(SimConfig(64, 64, 20_000, 2, "uniform"))
    assert a.point != b.point


def test_derive_seed_stable():
    assert derive_seed(42, 0) == derive_seed(42, 0)
    assert derive_seed(42, 0) != derive_seed(42, 1) != derive_seed(43, 1)
    assert 0 <= derive_seed(7, 3) < 2**63


_SCRIPT = (
    "import sys; from rendezvous import sim, _backend;"
    "e = sim.estimate_failure(sim.SimConfig(64, 256, 30000, 3, sys.argv[1], threads=2));"
    "g = sim.estimate_failure(sim.SimConfig(12, 30, 5000, 3, 'hamcode:k=2', graph='cycle:12'));"
    "print(_backend.backend_name(), repr(e.point), repr(g.point))"
)


@pytest.mark.parametrize("spec", ["code:binary:d=6", "aw:0.27:relabel", "uniform"])
def test_numba_and_numpy_backends_agree(spec):
    outs = []
    for flag in ("0", "1"):
        env = dict(os.environ, RDV_DISABLE_NUMBA=flag)
        outs.append(subprocess.run([sys.executable, "-c", _SCRIPT, spec], capture_output=True, text=True,
                                   env=env, check=True).stdout.split())
    assert outs[1][0] == "numpy"
    assert outs[0][1:] == outs[1][1:]


def _finite_supports():
    rng = np.random.default_rng(77)
    out = [code_strategy_from(build_binary_code(2)), code_strategy_from(build_padded_code(5))]
    for n in (2, 3, 5, 8):
        L = int(rng.integers(2, 6))
        k = int(rng.integers(1, 4))
        scheds = [tuple(int(v) for v in rng.integers(0, n + 1, L)) for _ in range(k)]
        w = rng.integers(1, 5, k)
        out.append(FiniteSupport(n, tuple(scheds), tuple(Fraction(int(v), int(w.sum())) for v in w)))
    return out


@pytest.mark.slow
@pytest.mark.parametrize("strategy", _finite_supports(), ids=lambda s: f"n{s.n}")
def test_oracle_agreement(strategy):
    T = len(strategy.schedules[0])
    for t in sorted({1, max(1, T // 2), T}):
        exact = float(exact_strategy_failure(strategy, t).value)
        est = estimate_failure(SimConfig(strategy.n, t, 1_000_000, 2024 + t, strategy))
        assert abs(est.point - exact) <= 4 * _half_width(est) + 1e-12, (t, exact, est.point)


def test_waiter_versus_waiter():
    est = estimate_failure(SimConfig(10, 10, 100_000, 4, "wfm:waiter", strategy2="wfm:waiter"))
    assert abs(est.point - 0.9) < 4 * math.sqrt(0.09 / 100_000)


def test_asymmetric_strategy_needs_partner():
    from rendezvous.sim import estimate_failure as ef
    with pytest.raises(DomainError):
        ef(SimConfig(10, 10, 100, 1, "wfm:waiter", strategy2="uniform"))


def test_uniform_random_failure():
    est = estimate_failure(SimConfig(100, 100, 200_000, 8, "uniform"))
    target = (1 - 1 / 100) ** 100
    assert est.ci_low - _half_width(est) <= target <= est.ci_high + _half_width(est)


def test_binary_code_failure_at_4n():
    d = 8
    n = 1 << d
    est = estimate_failure(SimConfig(n, 4 * n, 100_000, 42, f"code:binary:d={d}"))
    target = float(derangement_probability(n)) / (d + 2)
    assert abs(est.point - target) <= 4 * _half_width(est)


def test_failure_curve_matches_single_runs():
    cfg = SimConfig(32, 128, 10_000, 6, "aw:0.27")
    curve = failure_curve(cfg, [16, 64, 128])
    assert curve[-1].point == estimate_failure(cfg).point
    assert curve[0].point >= curve[1].point >= curve[2].point


def test_expected_time_wait_for_mommy():
    n = 500
    est = estimate_expected_time(SimConfig(n, n, 100_000, 3, "wfm"))
    assert est.point / n == pytest.approx((n + 1) / (2 * n), rel=0.01)
    assert est.extra["censored"] == 0 and not est.extra["unreliable"]


def test_expected_time_censoring_flag():
    # waiter vs waiter rarely meets: most trials are censored
    est = estimate_expected_time(SimConfig(10, 10, 2000, 3, "wfm:waiter", strategy2="wfm:waiter"))
    assert est.extra["unreliable"] and est.extra["censored_fraction"] > 0.8
    assert est.extra["cap"] == 200


@pytest.mark.slow
@pytest.mark.parametrize("spec", ["aw:0.249:relabel", "uniform", "code:binary:d=10",
                                  "code:baseB:A=1,B=2,k=11,shuffle_seed=3"])
def test_expected_time_above_floor(spec):
    n = 1024
    est = estimate_expected_time(SimConfig(n, n, 20_000, 17, spec))
    assert est.point / n >= 0.60


def test_sweep_rows_and_seeds():
    cfg = SimConfig(64, 64, 2000, 5, "aw:0.3")
    rows = sweep(cfg, "T/n", [0.5, 1, 2])
    assert [r.param for r in rows] == [0.5, 1, 2]
    assert [r.estimate.seed for r in rows] == [derive_seed(5, i) for i in range(3)]
    assert rows[0].estimate.extra["T"] == 32
    assert len(rows[0].csv_row()) == len(SWEEP_HEADER)
    with pytest.raises(DomainError):
        sweep(cfg, "T", [])
    with pytest.raises(DomainError):
        sweep(cfg, "colour", [1])


def test_theta_sweep_needs_aw():
    with pytest.raises(DomainError):
        sweep(SimConfig(64, 64, 100, 5, "uniform"), "theta", [0.1])
    rows = sweep(SimConfig(64, 64, 1000, 5, "aw:0.3"), "theta", [0.0, 0.5])
    assert rows[0].estimate.point > 0.3


def test_sweep_matches_exact_at_n2():
    s = FiniteSupport.uniform(2, [(1, 2, 0), (0, 0, 1)])
    rows = sweep(SimConfig(2, 1, 400_000, 3, s), "T", [1, 2, 3])
    for r in rows:
        exact = float(exact_strategy_failure(s, r.param).value)
        assert abs(r.estimate.point - exact) <= 4 * _half_width(r.estimate) + 1e-12
