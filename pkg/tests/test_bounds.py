import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

import property_suites as ps
from rendezvous.bounds import (
    ABCDProfile, DetailedProfile, MarginalVector, abcd_lower_bound, abcd_minimum, adaptive_simpson, aw_integrand,
    bounds_table, classify_steps, detailed_failure, detailed_minimum, expected_time_lower_bound, four_n_bound_at,
    four_n_lower_bound, lovasz_distribution, lovasz_extension_sample, submodular_f, two_wait_failure,
    uniform_bound_equal_wait, uniform_bound_general,
)
from rendezvous.codes import build_binary_code
from rendezvous.core import DomainError, WalkSchedule
from rendezvous.exact import exact_pair_failure

E = math.e


def test_classify_examples():
    n = 1000
    assert classify_steps(WalkSchedule(n, (5,) * 1000), 1000).all()
    assert not classify_steps(WalkSchedule(n, tuple(range(1, n + 1))), n).any()


def test_classify_threshold_is_strict():
    # n = 1000: n^(2/3) = 100 exactly, so 100 occurrences are rare and 101 frequent
    n = 1000
    rare = classify_steps(WalkSchedule(n, (7,) * 100 + tuple(range(101, 201))), 200)
    assert not rare.any()
    freq = classify_steps(WalkSchedule(n, (7,) * 101), 101)
    assert freq.all()


def test_classify_binary_code_row():
    d = 10
    n = 1 << d
    row = build_binary_code(d).schedules()[2]
    w = classify_steps(row, 4 * n)
    zeros = np.array(row.steps) == 0
    assert w[zeros].all()
    # rare labels appear twice; label n shares its vertex with the waiting label
    assert not w[~zeros & (np.array(row.steps) != n)].any()


def test_abcd_examples():
    n = 100
    assert abcd_lower_bound(ABCDProfile(0, 0, 0, 0), n) == 1
    assert abcd_lower_bound(ABCDProfile(0, n, 3, 7), n) == 0
    assert abcd_lower_bound(ABCDProfile(0, 0, 0, n), n) == pytest.approx(math.exp(-1))
    with pytest.raises(DomainError):
        ABCDProfile(1, 1, 1, 1, T=5)


def test_abcd_minimum_matches_grid():
    n = 30
    for T in range(0, 70, 3):
        best = min(abcd_lower_bound(ABCDProfile(T - b - c - d, b, c, d), n)
                   for b in range(T + 1) for c in range(T + 1 - b) for d in range(T + 1 - b - c))
        assert abcd_minimum(T, n) == pytest.approx(best, abs=1e-12)


def test_detailed_examples():
    assert detailed_failure(DetailedProfile((), (), 0), 50) == 1
    assert detailed_failure(DetailedProfile((50,), (50,), 3), 50) == 0


def test_detailed_minimum_attained_by_single_labels():
    n = 12
    for b, c, d in [(5, 3, 4), (12, 2, 0), (9, 9, 9), (15, 4, 2)]:
        best = math.inf
        for k in range(1, 4):
            for bs in itertools.product(range(min(b, n) + 1), repeat=k):
                if sum(bs) > b:
                    continue
                for cs in itertools.product(range(min(c, n) + 1), repeat=min(k, 2)):
                    if sum(cs) > c:
                        continue
                    best = min(best, detailed_failure(DetailedProfile(bs, cs, d), n))
        assert detailed_minimum(b, c, d, n) == pytest.approx(best, abs=1e-12)


def test_uniform_bounds_examples():
    n = 500
    assert uniform_bound_general(0, n) == 1 and uniform_bound_general(2 * n, n) == 0
    assert uniform_bound_general(3 * n, n) == 0
    assert uniform_bound_general(n, n) == pytest.approx(math.exp(-1) / 2)
    assert uniform_bound_equal_wait(4 * n, n) == 0 and uniform_bound_equal_wait(0, n) == 1
    assert uniform_bound_equal_wait(n, n) == pytest.approx(math.exp(-1) * 9 / 16)


def test_equal_wait_bound_dominates_where_both_nonnegative():
    n = 1000
    for T in range(0, 2 * n + 1, 10):
        assert uniform_bound_equal_wait(T, n) >= uniform_bound_general(T, n)


def test_four_n_bound():
    assert four_n_lower_bound(0) == 0
    assert four_n_lower_bound(4) == pytest.approx(math.exp(-2) / 16, rel=1e-14)
    assert four_n_lower_bound(1) == pytest.approx(math.exp(-3.5) / 4096, rel=1e-14)
    with pytest.raises(DomainError):
        four_n_lower_bound(4.5)
    assert four_n_bound_at(4000, 1000) == 0


def test_expected_time_integrals():
    r = expected_time_lower_bound()
    assert r.first_integral == pytest.approx(0.6027, abs=1e-4)
    assert r.improved == pytest.approx(0.6389, abs=1e-4)
    assert r.triangle == pytest.approx(1 / (2 * (E + 1) ** 2), abs=1e-12)
    ref, _ = integrate.quad(aw_integrand, 0, 1, epsabs=1e-12)
    assert r.first_integral == pytest.approx(ref, abs=1e-9)


def test_adaptive_simpson_on_known_integrals():
    assert adaptive_simpson(math.sin, 0, math.pi) == pytest.approx(2.0, abs=1e-9)
    assert adaptive_simpson(lambda t: math.exp(-t * t), 0, 3) == pytest.approx(
        math.sqrt(math.pi) / 2 * math.erf(3), abs=1e-9)


def test_two_wait_failure_examples():
    assert two_wait_failure(10, 10, 10, 10) == 1
    assert two_wait_failure(0, 10, 10, 10) == 0
    assert two_wait_failure(0, 0, 10, 10) == pytest.approx(math.exp(-1))
    with pytest.raises(DomainError):
        two_wait_failure(0, 11, 10, 10)


def test_submodular_f_examples():
    T, n = 6, 9
    full = set(range(1, T + 1))
    assert submodular_f(set(), set(), T, n) == 1
    assert submodular_f(full, full, T, n) == pytest.approx(math.exp(-T / n))
    assert submodular_f(full, set(), T, n) == pytest.approx(1 - T / n)
    with pytest.raises(DomainError):
        submodular_f(set(), set(), 10, 9)


def test_lovasz_examples(rng):
    x = MarginalVector({1: 0.3, 2: 0.7})
    dist = dict(lovasz_distribution(x))
    assert dist[frozenset({2})] == pytest.approx(0.4)
    assert dist[frozenset({1, 2})] == pytest.approx(0.3)
    assert dist[frozenset()] == pytest.approx(0.3)
    draws = [lovasz_extension_sample(x, rng) for _ in range(20_000)]
    assert np.mean([1 in d for d in draws]) == pytest.approx(0.3, abs=0.015)
    assert np.mean([2 in d for d in draws]) == pytest.approx(0.7, abs=0.015)
    zero = MarginalVector({1: 0.0, 2: 0.0})
    one = MarginalVector({1: 1.0, 2: 1.0})
    assert all(lovasz_extension_sample(zero, rng) == frozenset() for _ in range(100))
    assert all(lovasz_extension_sample(one, rng) == frozenset({1, 2}) for _ in range(100))


def test_lovasz_support_is_a_chain(rng):
    x = MarginalVector({s: float(v) for s, v in enumerate(rng.random(6))})
    sets = [s for s, _ in lovasz_distribution(x)]
    assert all(a <= b or b <= a for a in sets for b in sets)


def test_property_suites(rng):
    assert ps.submodularity_violations(rng) == 0
    assert ps.lovasz_violations(rng) == 0
    assert ps.shifting_violations(rng) == 0
    assert ps.concavity_violations() == 0


def test_abcd_bound_versus_exact_on_code_rows(rng):
    # per-pair bound against the exact failure at n = 12 with a documented 0.15 slack
    from rendezvous.codes import build_padded_code
    code = build_padded_code(12)
    rows = code.schedules()
    for _ in range(40):
        i, j = rng.integers(0, len(rows), 2)
        T = int(rng.integers(1, code.T + 1))
        prof = ABCDProfile.from_schedules(rows[i], rows[j], T)
        assert abcd_lower_bound(prof, 12) <= float(exact_pair_failure(rows[i], rows[j], T)) + 0.15


def test_bounds_table_columns():
    rows = bounds_table(1000, range(0, 4001, 100))
    assert rows[10]["T"] == 1000 and rows[10]["aw_opt"] == pytest.approx(1 / (E + 1))
    assert rows[11]["aw_opt"] == ""


@given(st.integers(0, 30), st.integers(0, 30), st.integers(0, 30), st.integers(0, 30), st.integers(1, 50))
def test_abcd_bound_in_unit_interval(a, b, c, d, n):
    v = abcd_lower_bound(ABCDProfile(a, b, c, d), n)
    assert 0 <= v <= 1
