"""Enumerated property checks for the submodular objective and the waiting-time
function; shared between the unit tests and the acceptance run."""

import itertools

import numpy as np

from rendezvous.bounds import (
    MarginalVector, extreme_distribution, lovasz_distribution, product_expectation, submodular_f, two_wait_failure,
)

TOL = 1e-12


def random_subset(rng, T):
    return frozenset(int(s) for s in np.flatnonzero(rng.random(T) < 0.5) + 1)


def submodularity_violations(rng, cases=500, T=8, n=10):
    bad = 0
    for _ in range(cases):
        X, X2, Y = random_subset(rng, T), random_subset(rng, T), random_subset(rng, T)
        f = lambda A, B: submodular_f(A, B, T, n)
        if f(X & X2, Y) + f(X | X2, Y) > f(X, Y) + f(X2, Y) + TOL:
            bad += 1
        if f(Y, X & X2) + f(Y, X | X2) > f(Y, X) + f(Y, X2) + TOL:
            bad += 1
    return bad


def lovasz_violations(rng, cases=50, T=5, n=8):
    ground = list(range(1, T + 1))
    subsets = [frozenset(c) for r in range(T + 1) for c in itertools.combinations(ground, r)]
    f = lambda A, B: submodular_f(A, B, T, n)
    bad = 0
    for _ in range(cases):
        k = int(rng.integers(2, 7))
        picks = rng.choice(len(subsets), size=k, replace=False)
        w = rng.random(k)
        w /= w.sum()
        phi = [(subsets[i], float(p)) for i, p in zip(picks, w)]
        x = MarginalVector.of_distribution(phi, ground)
        psi = lovasz_distribution(x)
        # the chain distribution must reproduce the marginals
        back = MarginalVector.of_distribution(psi, ground)
        if any(abs(back.x[s] - x.x[s]) > 1e-12 for s in ground):
            bad += 1
        if product_expectation(psi, f) > product_expectation(phi, f) + TOL:
            bad += 1
    return bad


def shifting_violations(rng, cases=50, T=20, n=20):
    g = lambda a, b: two_wait_failure(a, b, T, n)
    bad = 0
    for _ in range(cases):
        support = rng.choice(T + 1, size=int(rng.integers(1, 6)), replace=False)
        w = rng.random(support.size)
        w /= w.sum()
        P = [(int(t), float(p)) for t, p in zip(support, w)]
        mu = sum(t * p for t, p in P)
        if product_expectation(extreme_distribution(mu, T), g) > product_expectation(P, g) + TOL:
            bad += 1
    return bad


def concavity_violations(T=50, n=50):
    bad = 0
    for a in range(T + 1):
        for b in range(1, T):
            second = (two_wait_failure(a, b + 1, T, n) - 2 * two_wait_failure(a, b, T, n)
                      + two_wait_failure(a, b - 1, T, n))
            if second > TOL:
                bad += 1
            second = (two_wait_failure(b + 1, a, T, n) - 2 * two_wait_failure(b, a, T, n)
                      + two_wait_failure(b - 1, a, T, n))
            if second > TOL:
                bad += 1
    return bad
