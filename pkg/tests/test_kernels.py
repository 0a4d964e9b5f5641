import itertools

import numpy as np
import pytest

from rendezvous import kernels
from rendezvous._backend import HAVE_NUMBA


def naive_permanent(a):
    m = a.shape[0]
    return sum(int(np.prod([a[i, p[i]] for i in range(m)])) for p in itertools.permutations(range(m)))


@pytest.mark.parametrize("m", [1, 2, 3, 5, 7])
def test_permanent_flavours_agree_with_naive(m, rng):
    for _ in range(10):
        a = (rng.random((m, m)) < 0.7).astype(np.int64)
        want = naive_permanent(a)
        assert kernels._permanent01_np(a) == want
        assert int(kernels._permanent01_nb(a)) == want
        assert kernels.permanent01(a) == want


def test_permanent_of_all_ones_16():
    import math
    assert kernels.permanent01(np.ones((16, 16), dtype=np.int64)) == math.factorial(16)


def test_permanent_capacity():
    with pytest.raises(ValueError):
        kernels.permanent01(np.ones((17, 17), dtype=np.int64))


def test_fisher_yates_flavours_agree(rng):
    offs = kernels.draw_fy_offsets(rng, 500, 9)
    a = kernels._fisher_yates_np(offs, 9)
    b = kernels._fisher_yates_nb(offs, 9)
    assert np.array_equal(a, b)
    assert (np.sort(a, axis=1) == np.arange(9)).all()


def test_fisher_yates_uniform(rng):
    perms = kernels.random_permutations(rng, 48_000, 4)
    codes = perms @ np.array([64, 16, 4, 1])
    counts = np.unique(codes, return_counts=True)[1]
    assert counts.size == 24
    exp = 48_000 / 24
    assert ((counts - exp) ** 2 / exp).sum() < 49.7


def test_count_avoiding_flavours_agree(rng):
    m = 12
    zmask = rng.random((m, m)) < 0.15
    cols = np.flatnonzero(zmask.any(axis=0)).astype(np.int64)
    offs = kernels.draw_fy_offsets(rng, 4000, m, cols.size)
    a = kernels._count_avoiding_np(offs, cols, zmask)
    b = int(kernels._count_avoiding_nb(offs, cols, zmask))
    assert a == b


def test_first_hit_flavours_agree(rng):
    n, L = 7, 20
    tx = rng.integers(0, n, (5, L)).astype(np.int32)
    ty = rng.integers(0, n, (4, L)).astype(np.int32)
    ix = rng.integers(0, 5, 300)
    iy = rng.integers(0, 4, 300)
    perm = kernels.random_permutations(rng, 300, n)
    a = kernels._first_hit_np(tx, ix, ty, iy, perm, L)
    b = kernels._first_hit_nb(tx, ix, ty, iy, perm, L)
    assert np.array_equal(a, b)
    # direct check of the definition
    for k in range(300):
        hits = [t for t in range(L) if tx[ix[k], t] == perm[k, ty[iy[k], t]]]
        assert a[k] == (hits[0] if hits else -1)


@pytest.mark.parametrize("edge", [False, True])
@pytest.mark.parametrize("check_first", [False, True])
def test_first_hit_walk_flavours_agree(rng, edge, check_first):
    n, B, W = 8, 400, 15
    steps = rng.integers(-1, 2, (B, W))
    xs = (np.cumsum(steps, axis=1) % n).astype(np.int32)
    ys = (np.cumsum(rng.integers(-1, 2, (B, W)), axis=1) % n).astype(np.int32)
    perm = kernels.random_permutations(rng, B, n)
    a = kernels._first_hit_walk_np(xs, ys, perm, edge, check_first)
    b = kernels._first_hit_walk_nb(xs, ys, perm, edge, check_first)
    assert np.array_equal(a, b)


def test_backend_flag_reported():
    from rendezvous._backend import backend_name
    assert backend_name() in ("numba", "numpy")
    assert kernels.HAVE_NUMBA == HAVE_NUMBA
