"""Time the hot kernels with numba and with the numpy fallback.

Run: python3 benchmarks/bench_kernels.py [--repeats 5]

Each backend runs in its own interpreter (the backend is fixed at import time by
RDV_DISABLE_NUMBA), and the script checks that both produce the same outputs.
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _best(fn, repeats):
    fn()  # warm-up, includes numba compilation
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _digest(x):
    a = np.asarray(x, dtype=np.int64).ravel()
    return int((a * (np.arange(a.size) % 1009 + 1)).sum())


def run_worker(repeats):
    from rendezvous import kernels
    from rendezvous._backend import backend_name
    from rendezvous.strategies import BinaryCode

    rng = np.random.default_rng(1)
    res = {"backend": backend_name()}

    a = (rng.random((14, 14)) < 0.7).astype(np.int64)
    res["permanent01 m=14"] = _best(lambda: kernels.permanent01(a), repeats)

    offsets = kernels.draw_fy_offsets(np.random.default_rng(2), 16384, 1024)
    res["fisher_yates 16384x1024"] = _best(lambda: kernels.fisher_yates(offsets, 1024), repeats)

    m = 500
    cols = np.sort(rng.choice(m, 200, replace=False))
    zmask = rng.random((m, m)) < 0.004
    offs = kernels.draw_fy_offsets(np.random.default_rng(3), 20000, m, r=cols.size)
    res["count_avoiding m=500"] = _best(lambda: kernels.count_avoiding(offs, cols, zmask), repeats)

    n, d = 1024, 10
    s = BinaryCode(d)
    g = s.sample_segment(np.random.default_rng(4), 8192, n, 0)
    perm = kernels.random_permutations(np.random.default_rng(5), 8192, n)
    tab = ((g.table.astype(np.int32) - 1) % n).astype(np.int32)
    res["first_hit binary d=10"] = _best(lambda: kernels.first_hit(tab, g.idx, tab, g.idx[::-1].copy(), perm, 4 * n),
                                         repeats)

    L, N = 300, 600
    walk_rng = np.random.default_rng(6)
    xs = (np.cumsum(walk_rng.integers(-1, 2, (8192, L + 1)), axis=1) % N).astype(np.int32)
    ys = (np.cumsum(walk_rng.integers(-1, 2, (8192, L + 1)), axis=1) % N).astype(np.int32)
    gperm = np.tile(np.arange(N, dtype=np.int32), (8192, 1))
    res["first_hit_walk cycle 600"] = _best(lambda: kernels.first_hit_walk(xs, ys, gperm, True, True), repeats)

    out = {"backend": res.pop("backend")}
    out["kernels"] = {k: {"seconds": t, "digest": _digest(v)} for k, (t, v) in res.items()}
    print(json.dumps(out))


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = p.parse_args()
    if args.worker:
        run_worker(args.repeats)
        return 0

    results = {}
    for flag in ("0", "1"):
        env = dict(os.environ, RDV_DISABLE_NUMBA=flag)
        proc = subprocess.run([sys.executable, __file__, "--worker", "--repeats", str(args.repeats)],
                              capture_output=True, text=True, env=env, check=True)
        r = json.loads(proc.stdout)
        results[r["backend"]] = r["kernels"]
    if "numba" not in results:
        print("numba is not installed; only the numpy timings are available")
    print(f"{'kernel':28s} {'numpy s':>10s} {'numba s':>10s} {'speedup':>8s}  same")
    ok = True
    for name, np_row in results["numpy"].items():
        nb_row = results.get("numba", {}).get(name)
        if nb_row is None:
            print(f"{name:28s} {np_row['seconds']:10.4f}")
            continue
        same = nb_row["digest"] == np_row["digest"]
        ok &= same
        print(f"{name:28s} {np_row['seconds']:10.4f} {nb_row['seconds']:10.4f} "
              f"{np_row['seconds'] / nb_row['seconds']:7.1f}x  {'yes' if same else 'NO'}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
