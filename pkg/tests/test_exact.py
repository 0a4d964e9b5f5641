import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from rendezvous.codes import build_binary_code
from rendezvous.core import CapacityError, DomainError, Permutation, WalkSchedule, count_derangements, rendezvous_time
from rendezvous.exact import (
    ExactProbability, ResidualMatrix, avoidance_probability_estimate, exact_pair_failure, exact_strategy_failure,
    permanent, random_zero_set, residual_matrix,
)
from rendezvous.strategies import FiniteSupport, code_strategy_from


def brute_pair_failure(x, y, T):
    n = x.n
    fails = 0
    for images in itertools.permutations(range(1, n + 1)):
        pi = Permutation(n, images)
        rec = rendezvous_time(WalkSchedule(n, x.steps[:T]), WalkSchedule(n, y.steps[:T]), pi)
        fails += not rec.met
    return Fraction(fails, math.factorial(n))


def brute_permanent(M):
    a = M.to_dense()
    m = M.m
    return sum(all(a[i, p[i]] for i in range(m)) for p in itertools.permutations(range(m)))


def test_diagonal_zeroes_give_derangements():
    for n in range(1, 13):
        M = ResidualMatrix(n, frozenset((i, i) for i in range(n)))
        assert permanent(M) == count_derangements(n)


def test_permanent_capacity_limit():
    with pytest.raises(CapacityError):
        permanent(ResidualMatrix(17, frozenset()))


def test_permanent_invariant_under_transpose(rng):
    for _ in range(20):
        M = random_zero_set(7, 10, 3, rng)
        assert permanent(M) == permanent(M.transpose())


def test_residual_matrix_uses_canonical_labels():
    x = WalkSchedule(3, (0, 1))
    y = WalkSchedule(3, (3, 0))
    M = residual_matrix(x, y, 2)
    assert M.zeroes == frozenset({(2, 2), (0, 2)})
    with pytest.raises(DomainError):
        residual_matrix(x, y, 3)


def test_d2_code_failure_is_three_thirty_seconds():
    f = exact_strategy_failure(code_strategy_from(build_binary_code(2)), 16)
    assert f.value == Fraction(3, 32)
    assert f.to_json() == {"numerator": 3, "denominator": 32, "value": 0.09375}


def test_d2_code_failure_by_brute_force():
    rows = build_binary_code(2).schedules()
    total = sum(brute_pair_failure(x, y, 16) for x in rows for y in rows) / 16
    assert total == Fraction(3, 32)


def test_exact_strategy_requires_normalised_probabilities():
    s = WalkSchedule(2, (1, 2))
    with pytest.raises(DomainError):
        exact_strategy_failure([(s, Fraction(1, 2))], 2)
    with pytest.raises(DomainError):
        exact_strategy_failure([], 2)


def test_exact_probability_validation():
    with pytest.raises(DomainError):
        ExactProbability(3, 2)
    assert float(ExactProbability(1, 4)) == 0.25


@given(st.integers(2, 5), st.data())
def test_pair_failure_matches_brute_force(n, data):
    T = data.draw(st.integers(0, 6))
    xs = data.draw(st.lists(st.integers(0, n), min_size=T, max_size=T))
    ys = data.draw(st.lists(st.integers(0, n), min_size=T, max_size=T))
    x, y = WalkSchedule(n, xs), WalkSchedule(n, ys)
    assert exact_pair_failure(x, y, T).value == brute_pair_failure(x, y, T)


@given(st.integers(1, 7), st.data())
def test_permanent_matches_enumeration(m, data):
    cells = data.draw(st.sets(st.tuples(st.integers(0, m - 1), st.integers(0, m - 1)), max_size=m * m))
    M = ResidualMatrix(m, frozenset(cells))
    assert permanent(M) == brute_permanent(M)


def test_finite_support_exact_is_symmetric_in_players(rng):
    n = 4
    scheds = [tuple(int(v) for v in rng.integers(0, n + 1, 6)) for _ in range(3)]
    s = FiniteSupport(n, tuple(scheds), (Fraction(1, 2), Fraction(1, 3), Fraction(1, 6)))
    direct = sum(px * py * exact_pair_failure(x, y, 6).value
                 for x, px in s.weighted_schedules() for y, py in s.weighted_schedules())
    assert exact_strategy_failure(s, 6).value == direct


def test_avoidance_estimate_agrees_with_exact(rng):
    M = random_zero_set(10, 15, 3, rng)
    exact = permanent(M) / math.factorial(10)
    est = avoidance_probability_estimate(M, 200_000, rng)
    assert abs(est.point - exact) <= 4 * est.half_width
    assert est.extra["kappa"] == M.kappa <= 3


def test_avoidance_estimate_empty_set(rng):
    est = avoidance_probability_estimate(ResidualMatrix(5, frozenset()), 10, rng)
    assert est.point == 1.0


def test_random_zero_set_respects_cap(rng):
    M = random_zero_set(50, 100, 3, rng)
    assert len(M.zeroes) == 100 and M.kappa <= 3
    with pytest.raises(DomainError):
        random_zero_set(5, 20, 3, rng)
