"""Hot inner loops, each in a numba flavour (``*_nb``) and a numpy flavour (``*_np``).

All randomness is drawn by the caller with a numpy ``Generator`` and passed in
as arrays, so both flavours are deterministic functions of their inputs and
return bit-identical results. The unsuffixed names dispatch to numba when it is
available (see ``_backend``).
"""

import numpy as np

from rendezvous._backend import HAVE_NUMBA, njit

MAX_EXACT_PERMANENT = 16


# ---------------------------------------------------------------------------
# Permanent of a 0/1 matrix (Ryser inclusion-exclusion)
# ---------------------------------------------------------------------------
#
# Arithmetic is done modulo 2**64. For m <= 16 the permanent is at most
# 16! < 2**64, so the residue is the exact value even though intermediate
# products of row sums (up to 16**16) wrap.


@njit
def _permanent01_nb(a):
    m = a.shape[0]
    if m == 0:
        return np.uint64(1)
    rowsum = np.zeros(m, dtype=np.int64)
    total = np.uint64(0)
    one = np.uint64(1)
    size = 0
    gray = 0
    for k in range(1, 1 << m):
        # bit flipped between gray(k-1) and gray(k)
        j = 0
        while not (k >> j) & 1:
            j += 1
        gray ^= 1 << j
        if (gray >> j) & 1:
            size += 1
            for i in range(m):
                rowsum[i] += a[i, j]
        else:
            size -= 1
            for i in range(m):
                rowsum[i] -= a[i, j]
        prod = one
        for i in range(m):
            prod = prod * np.uint64(rowsum[i])
        if (m - size) % 2 == 0:
            total = total + prod
        else:
            total = total - prod
    return total


def _permanent01_np(a):
    a = np.asarray(a, dtype=np.int64)
    m = a.shape[0]
    if m == 0:
        return 1
    masks = np.arange(1, 1 << m, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(m)) & 1).astype(np.int64)
    rowsums = (bits @ a.T).astype(np.uint64)
    prods = np.prod(rowsums, axis=1, dtype=np.uint64)
    sizes = bits.sum(axis=1)
    even = (m - sizes) % 2 == 0
    pos = int(prods[even].sum(dtype=np.uint64))
    neg = int(prods[~even].sum(dtype=np.uint64))
    return (pos - neg) % (1 << 64)


def permanent01(a):
    """Exact permanent of a square 0/1 matrix with side at most 16."""
    a = np.ascontiguousarray(a, dtype=np.int64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("permanent01 needs a square matrix")
    if a.shape[0] > MAX_EXACT_PERMANENT:
        raise ValueError(f"matrix side {a.shape[0]} exceeds {MAX_EXACT_PERMANENT}")
    if HAVE_NUMBA:
        return int(_permanent01_nb(a))
    return int(_permanent01_np(a))


# ---------------------------------------------------------------------------
# Fisher-Yates from pre-drawn offsets
# ---------------------------------------------------------------------------
#
# offsets[b, i] must lie in [0, n - i). Position i is swapped with i + offsets[b, i].


@njit
def _fisher_yates_nb(offsets, n):
    batch, r = offsets.shape
    out = np.empty((batch, n), dtype=np.int32)
    for b in range(batch):
        for i in range(n):
            out[b, i] = i
        for i in range(r):
            j = i + offsets[b, i]
            tmp = out[b, i]
            out[b, i] = out[b, j]
            out[b, j] = tmp
    return out


def _fisher_yates_np(offsets, n):
    batch, r = offsets.shape
    out = np.tile(np.arange(n, dtype=np.int32), (batch, 1))
    rows = np.arange(batch)
    for i in range(r):
        j = i + offsets[:, i]
        tmp = out[rows, i].copy()
        out[rows, i] = out[rows, j]
        out[rows, j] = tmp
    return out


def fisher_yates(offsets, n):
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    if HAVE_NUMBA:
        return _fisher_yates_nb(offsets, n)
    return _fisher_yates_np(offsets, n)


def draw_fy_offsets(rng, batch, n, r=None):
    """Offsets for ``r`` Fisher-Yates steps on ``n`` items (default: a full shuffle)."""
    if r is None:
        r = max(n - 1, 0)
    if r == 0:
        return np.zeros((batch, 0), dtype=np.int64)
    highs = np.arange(n, n - r, -1, dtype=np.int64)
    return rng.integers(0, highs, size=(batch, r), dtype=np.int64)


def random_permutations(rng, batch, n):
    """``batch`` independent uniform permutations of range(n), one per row."""
    return fisher_yates(draw_fy_offsets(rng, batch, n), n)


# ---------------------------------------------------------------------------
# Avoidance counting for a zero set Z (permutations missing every zero)
# ---------------------------------------------------------------------------


@njit
def _count_avoiding_nb(offsets, cols, zmask):
    batch, r = offsets.shape
    m = zmask.shape[0]
    perm = np.empty(m, dtype=np.int64)
    good = 0
    for b in range(batch):
        for i in range(m):
            perm[i] = i
        ok = True
        for i in range(r):
            j = i + offsets[b, i]
            img = perm[j]
            perm[j] = perm[i]
            perm[i] = img
            if zmask[img, cols[i]]:
                ok = False
                break
        if ok:
            good += 1
    return good


def _count_avoiding_np(offsets, cols, zmask):
    batch, r = offsets.shape
    m = zmask.shape[0]
    perm = np.tile(np.arange(m, dtype=np.int64), (batch, 1))
    rows = np.arange(batch)
    alive = np.ones(batch, dtype=bool)
    for i in range(r):
        j = i + offsets[:, i]
        img = perm[rows, j]
        perm[rows, j] = perm[rows, i]
        perm[rows, i] = img
        alive &= ~zmask[img, cols[i]]
    return int(alive.sum())


def count_avoiding(offsets, cols, zmask):
    """Number of sampled partial permutations with ``zmask[pi(c), c]`` false for all c.

    ``cols`` lists the columns that carry zeros; row ``b`` of ``offsets`` drives a
    partial Fisher-Yates shuffle whose i-th image is pi(cols[i]).
    """
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    cols = np.ascontiguousarray(cols, dtype=np.int64)
    zmask = np.ascontiguousarray(zmask, dtype=np.bool_)
    if HAVE_NUMBA:
        return int(_count_avoiding_nb(offsets, cols, zmask))
    return _count_avoiding_np(offsets, cols, zmask)


# ---------------------------------------------------------------------------
# First meeting on the complete graph
# ---------------------------------------------------------------------------
#
# Player schedules are rows of lookup tables: player x at step t is at vertex
# table_x[idx_x[b], t]; player y's vertex v is vertex perm[b, v] in x's labels.


@njit
def _first_hit_nb(table_x, idx_x, table_y, idx_y, perm, length):
    batch = idx_x.shape[0]
    out = np.full(batch, -1, dtype=np.int64)
    for b in range(batch):
        rx = idx_x[b]
        ry = idx_y[b]
        for t in range(length):
            if table_x[rx, t] == perm[b, table_y[ry, t]]:
                out[b] = t
                break
    return out


def _first_hit_np(table_x, idx_x, table_y, idx_y, perm, length):
    xs = table_x[idx_x, :length]
    ys = table_y[idx_y, :length]
    mapped = np.take_along_axis(perm, ys.astype(np.int64), axis=1)
    hits = xs == mapped
    found = hits.any(axis=1)
    return np.where(found, hits.argmax(axis=1), -1).astype(np.int64)


def first_hit(table_x, idx_x, table_y, idx_y, perm, length):
    """Index of the first step where the two players share a vertex, else -1."""
    table_x = np.ascontiguousarray(table_x, dtype=np.int32)
    table_y = np.ascontiguousarray(table_y, dtype=np.int32)
    idx_x = np.ascontiguousarray(idx_x, dtype=np.int64)
    idx_y = np.ascontiguousarray(idx_y, dtype=np.int64)
    perm = np.ascontiguousarray(perm, dtype=np.int32)
    if HAVE_NUMBA:
        return _first_hit_nb(table_x, idx_x, table_y, idx_y, perm, length)
    return _first_hit_np(table_x, idx_x, table_y, idx_y, perm, length)


# ---------------------------------------------------------------------------
# First meeting for walks on a graph
# ---------------------------------------------------------------------------
#
# xs, ys have shape (batch, L + 1); column 0 is the position before this segment.
# A vertex meeting at column c >= 1 (or c = 0 when check_first) counts, and with
# edge=True so does a swap across an edge between columns c - 1 and c.


@njit
def _first_hit_walk_nb(xs, ys, perm, edge, check_first):
    batch, width = xs.shape
    out = np.full(batch, -1, dtype=np.int64)
    for b in range(batch):
        if check_first and xs[b, 0] == perm[b, ys[b, 0]]:
            out[b] = 0
            continue
        prev_y = perm[b, ys[b, 0]]
        for c in range(1, width):
            cur_y = perm[b, ys[b, c]]
            if xs[b, c] == cur_y:
                out[b] = c
                break
            if edge and xs[b, c - 1] == cur_y and xs[b, c] == prev_y and xs[b, c] != xs[b, c - 1]:
                out[b] = c
                break
            prev_y = cur_y
    return out


def _first_hit_walk_np(xs, ys, perm, edge, check_first):
    mapped = np.take_along_axis(perm, ys.astype(np.int64), axis=1)
    hits = xs == mapped
    if not check_first:
        hits[:, 0] = False
    if edge:
        swap = (xs[:, :-1] == mapped[:, 1:]) & (xs[:, 1:] == mapped[:, :-1]) & (xs[:, 1:] != xs[:, :-1])
        hits[:, 1:] |= swap
    found = hits.any(axis=1)
    return np.where(found, hits.argmax(axis=1), -1).astype(np.int64)


def first_hit_walk(xs, ys, perm, edge=False, check_first=True):
    xs = np.ascontiguousarray(xs, dtype=np.int32)
    ys = np.ascontiguousarray(ys, dtype=np.int32)
    perm = np.ascontiguousarray(perm, dtype=np.int32)
    if HAVE_NUMBA:
        return _first_hit_walk_nb(xs, ys, perm, bool(edge), bool(check_first))
    return _first_hit_walk_np(xs, ys, perm, bool(edge), bool(check_first))
