"""Named experiments that reproduce the headline numbers as CSV/JSON artifacts.

A recipe runs its computations, writes its tables into an output directory and
returns a list of checks; the run passes when every check passes. Output files
contain only the version, the configuration, the seed and the results, so two
runs with equal seeds produce identical bytes whatever the thread count.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from rendezvous import __version__, bounds, codes, exact, graphs, strategies
from rendezvous.core import count_derangements, derangement_probability
from rendezvous.sim import SimConfig, derive_seed, estimate_expected_time, estimate_failure, failure_curve
from rendezvous.stats import binomial_sigma, simultaneous_z, within_wilson

E = math.e


@dataclass
class Check:
    name: str
    measured: object
    expected: object
    tolerance: str
    basis: str  # "reference" (published value), "derived" (independent computation) or "trivial"
    passed: bool

    def to_json(self):
        d = asdict(self)
        for k in ("measured", "expected"):
            v = d[k]
            if isinstance(v, Fraction):
                d[k] = str(v)
            elif isinstance(v, (np.floating, np.integer)):
                d[k] = v.item()
        return d


@dataclass
class RecipeContext:
    seed: int
    quick: bool
    threads: Optional[int]
    outdir: Path
    checks: list = field(default_factory=list)
    files: list = field(default_factory=list)

    def sub_seed(self, *key) -> int:
        return derive_seed(self.seed, *key)

    def check(self, name, measured, expected, ok, tolerance="", basis="derived"):
        self.checks.append(Check(name, measured, expected, tolerance, basis, bool(ok)))
        return ok

    def sim(self, **kw) -> SimConfig:
        return SimConfig(threads=self.threads, **kw)

    def write_json(self, name, payload):
        path = self.outdir / name
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        self.files.append(path)

    def write_csv(self, name, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        path = self.outdir / name
        path.write_text(buf.getvalue())
        self.files.append(path)


def _within(x, target, tol):
    return abs(x - target) <= tol


# ---------------------------------------------------------------------------


def recipe_codes(ctx: RecipeContext):
    rows = []
    fams = [("binary", d, codes.build_binary_code(d)) for d in range(1, 8 if ctx.quick else 9)]
    fams += [("padded", n, codes.build_padded_code(n)) for n in range(4, 33 if ctx.quick else 65)]
    for A, B, k in [(1, 2, 3), (1, 4, 3), (2, 3, 2), (3, 4, 2), (1, 3, 3)]:
        fams.append(("baseB", f"{A},{B},{k}", codes.build_base_b_code(A, B, k)))
    for fam, param, code in fams:
        ok = codes.verify_rendezvous_code(code).valid
        rows.append([fam, param, code.n, code.T, code.size, int(ok)])
        ctx.check(f"{fam}({param}) is a rendezvous code", ok, True, ok, "exhaustive", "derived")
    ctx.write_csv("codes.csv", ["family", "param", "n", "T", "rows", "valid"], rows)
    m = codes.build_binary_code(2)
    ctx.write_json("binary_d2.json", m.to_json())


def recipe_exact_small(ctx: RecipeContext):
    code = codes.build_binary_code(2)
    f = exact.exact_strategy_failure(strategies.code_strategy_from(code), 16)
    ctx.check("d=2 code failure at T=16", str(f.value), "3/32", f.value == Fraction(3, 32), "exact", "reference")
    ders = []
    for n in range(1, 13):
        M = exact.ResidualMatrix(n, frozenset((i, i) for i in range(n)))
        p = exact.permanent(M)
        ders.append([n, p, count_derangements(n)])
        ctx.check(f"Perm(J-I) = D_{n}", p, count_derangements(n), p == count_derangements(n), "exact", "derived")
    ctx.write_csv("derangements.csv", ["n", "permanent", "derangements"], ders)
    curve = []
    for T in range(0, 17):
        v = exact.exact_strategy_failure(strategies.code_strategy_from(code), T).value
        curve.append([T, v.numerator, v.denominator, float(v)])
    ctx.write_csv("binary_d2_exact_curve.csv", ["T", "numerator", "denominator", "value"], curve)


def recipe_avoidance(ctx: RecipeContext):
    samples = 20_000 if ctx.quick else 1_000_000
    ms = (100,) if ctx.quick else (100, 200, 500)
    rows = []
    for i, m in enumerate(ms):
        for j, (num, den) in enumerate([(1, 2), (1, 1), (2, 1)]):
            z = m * num // den
            kappa = int(math.floor(m ** (2 / 3)))
            rng = np.random.default_rng(ctx.sub_seed(i, j))
            M = exact.random_zero_set(m, z, kappa, rng)
            est = exact.avoidance_probability_estimate(M, samples, rng)
            target = math.exp(-z / m)
            tol = max(0.01, 4 * est.half_width)
            ok = _within(est.point, target, tol)
            rows.append([m, z, M.kappa, repr(est.point), repr(est.ci_low), repr(est.ci_high), repr(target), int(ok)])
            ctx.check(f"avoidance m={m} |Z|={z}", est.point, target, ok, f"max(0.01, 4 half-widths) = {tol:.4g}", "reference")
    ctx.write_csv("avoidance.csv", ["m", "zeroes", "kappa", "point", "ci_low", "ci_high", "exp_minus_z_over_m", "pass"], rows)


def recipe_phase_transition(ctx: RecipeContext):
    trials = 10_000 if ctx.quick else 100_000
    ds = (6, 8) if ctx.quick else (6, 8, 10)
    ratios = [0.5 * i for i in range(1, 9)]
    rows = []
    at4 = []
    for i, d in enumerate(ds):
        n = 1 << d
        cfg = ctx.sim(n=n, T=4 * n, trials=trials, seed=ctx.sub_seed(i), strategy=f"code:binary:d={d}")
        ests = failure_curve(cfg, [int(r * n) for r in ratios])
        for r, e in zip(ratios, ests):
            rows.append([d, n, r, repr(e.point), repr(e.ci_low), repr(e.ci_high), e.trials, e.seed])
        e = ests[-1]
        bound = 1 / (d + 2)
        sigma = binomial_sigma(e.point, e.trials)
        ctx.check(f"d={d} failure at T=4n below 1/(rows)", e.point, bound, e.point <= bound + 4 * sigma,
                  "<= 1/(d+2) + 4 sigma", "derived")
        exact_val = float(derangement_probability(n)) / (d + 2)
        ctx.check(f"d={d} failure at T=4n matches same-row formula", e.point, exact_val, e.contains(exact_val) or
                  _within(e.point, exact_val, 4 * sigma), "Wilson 95% or 4 sigma", "derived")
        at4.append(e.point)
    ctx.check("failure at T=4n decreases with d", at4, "decreasing", all(a > b for a, b in zip(at4, at4[1:])),
              "strict", "derived")
    ctx.write_csv("phase_transition.csv", ["d", "n", "T_over_n", "point", "ci_low", "ci_high", "trials", "seed"], rows)


def recipe_aw_constants(ctx: RecipeContext):
    th = strategies.optimal_theta(1, 1)
    ctx.check("optimal theta at T=n", th, 1 / (E + 1), _within(th, 1 / (E + 1), 1e-9), "1e-9", "reference")
    fo = strategies.aw_optimal_failure(1, 1)
    ctx.check("optimal failure at T=n", fo, 1 / (E + 1), _within(fo, 1 / (E + 1), 1e-9), "1e-9", "derived")
    et = bounds.expected_time_lower_bound()
    ctx.check("first integral", et.first_integral, 0.6027, _within(et.first_integral, 0.6027, 1e-4), "1e-4", "reference")
    ctx.check("improved bound", et.improved, 0.6389, _within(et.improved, 0.6389, 1e-4), "1e-4", "reference")
    n = 1000 if not ctx.quick else 500
    trials = 100_000 if not ctx.quick else 20_000
    cfg = ctx.sim(n=n, T=n, trials=trials, seed=ctx.sub_seed(0), strategy=f"aw:{1 / (E + 1)!r}")
    e = estimate_failure(cfg)
    ctx.check("one AW round failure", e.point, 1 / (E + 1), _within(e.point, 1 / (E + 1), 0.012), "0.012", "derived")
    n2 = 2000 if not ctx.quick else 500
    t2 = 50_000 if not ctx.quick else 10_000
    cfg = ctx.sim(n=n2, T=n2, trials=t2, seed=ctx.sub_seed(1), strategy="aw:0.249:relabel")
    m = estimate_expected_time(cfg)
    ctx.check("repeated AW E[tau]/n", m.point / n2, 0.829, 0.81 <= m.point / n2 <= 0.85, "[0.81, 0.85]", "reference")
    ctx.write_json("aw_constants.json", {
        "optimal_theta": th, "optimal_failure": fo, "first_integral": et.first_integral,
        "improved": et.improved, "one_round_failure": e.to_json(), "repeated_expected_time": m.to_json(),
        "repeated_expected_time_over_n": m.point / n2,
    })


def recipe_expected_time(ctx: RecipeContext):
    trials = 10_000 if ctx.quick else 50_000
    out = {}
    n = 512 if ctx.quick else 2000
    cfg = ctx.sim(n=n, T=n, trials=trials, seed=ctx.sub_seed(0), strategy="aw:0.249:relabel")
    e = estimate_expected_time(cfg)
    out["aw_0.249"] = {"config": cfg.to_json(), "estimate": e.to_json(), "ratio": e.point / n}
    ctx.check("AW theta=0.249 E[tau]/n", e.point / n, 0.829, 0.81 <= e.point / n <= 0.85, "[0.81, 0.85]", "reference")

    k = 9 if ctx.quick else 11
    n = 1 << (k - 1)
    cfg = ctx.sim(n=n, T=4 * n, trials=trials, seed=ctx.sub_seed(1),
                  strategy=f"code:baseB:A=1,B=2,k={k},shuffle_seed={ctx.sub_seed(2)}", distinct_rows_only=True)
    e = estimate_expected_time(cfg)
    out["base2_code"] = {"config": cfg.to_json(), "estimate": e.to_json(), "ratio": e.point / n}
    ctx.check("base-2 code E[tau]/n (distinct rows)", e.point / n, 4 * (1 - 2 / E), 1.03 <= e.point / n <= 1.08,
              "[1.03, 1.08]", "reference")

    n = 500
    cfg = ctx.sim(n=n, T=n, trials=trials if ctx.quick else 100_000, seed=ctx.sub_seed(3), strategy="wfm")
    e = estimate_expected_time(cfg)
    out["wait_for_mommy"] = {"config": cfg.to_json(), "estimate": e.to_json(), "ratio": e.point / n}
    ctx.check("Wait For Mommy E[tau]/n", e.point / n, 0.5, _within(e.point / n, 0.5, 0.01), "0.01", "reference")
    ctx.write_json("expected_time.json", out)


BUNDLED_N = 1024


def bundled_strategies(n: int = BUNDLED_N, seed: int = 0) -> dict:
    """The symmetric strategies checked against the lower bounds (n must be 1024 for the codes)."""
    out = {
        "aw_opt": f"aw:{1 / (E + 1)!r}:relabel",
        "aw_0.249": "aw:0.249:relabel",
        "aw_0": "aw:0",
        "uniform": "uniform",
    }
    if n == 1024:
        out["binary_d10"] = "code:binary:d=10"
        out["padded_1024"] = "code:padded:n=1024"
        out["baseB_3_4_6"] = f"code:baseB:A=3,B=4,k=6,shuffle_seed={seed}"
    return out


def equal_wait_status(strategy, n: int, T: int, rng, samples: int = 64) -> bool:
    """Whether every schedule has the same number of waiting steps in its first T steps.

    Exact for code strategies (all rows are checked), sampled otherwise.
    """
    s = strategies.parse_strategy(strategy)
    if isinstance(s, strategies._CodeStrategy):
        if T > s.code.T:
            # rows of later segments are drawn independently, so counts vary
            return False
        counts = set(bounds.waiting_counts_of_rows(s._table(0)[:, :T], n, T).tolist())
        return len(counts) == 1
    counts = {int(bounds.classify_steps(strategies.sample_schedule(s, n, T, rng), T).sum()) for _ in range(samples)}
    return len(counts) == 1


def lower_bound_sweep(trials: int, seed: int, threads=None, n: int = BUNDLED_N, grid_step: float = 0.25):
    """Measured failure of each bundled strategy on a T grid next to every applicable bound."""
    ratios = [grid_step * i for i in range(1, int(round(4 / grid_step)) + 1)]
    Ts = [int(round(r * n)) for r in ratios]
    rows = []
    for i, (name, desc) in enumerate(bundled_strategies(n, seed).items()):
        cfg = SimConfig(n=n, T=max(Ts), trials=trials, seed=derive_seed(seed, i), strategy=desc, threads=threads)
        ests = failure_curve(cfg, Ts)
        rng = np.random.default_rng(derive_seed(seed, i, 1))
        for T, e in zip(Ts, ests):
            sigma = binomial_sigma(e.point, e.trials)
            top = e.point + 4 * sigma
            eq = equal_wait_status(desc, n, T, rng)
            b_gen = bounds.uniform_bound_general(T, n) if T <= 2 * n else None
            b_eq = bounds.uniform_bound_equal_wait(T, n) if eq else None
            b_5 = bounds.four_n_bound_at(T, n) if T < 4 * n else None
            viol = [k for k, b in (("1T2n", b_gen), ("1T4n", b_eq), ("thm5", b_5)) if b is not None and top < b]
            rows.append({"strategy": name, "T": T, "point": e.point, "sigma": sigma, "equal_wait": eq,
                         "eq_1T2n": b_gen, "eq_1T4n": b_eq, "thm5": b_5, "violations": viol})
    return rows


def recipe_lower_bounds(ctx: RecipeContext):
    trials = 4_000 if ctx.quick else 20_000
    rows = lower_bound_sweep(trials, ctx.sub_seed(0), ctx.threads, grid_step=0.5 if ctx.quick else 0.25)
    fmt = lambda v: "" if v is None else repr(v)
    ctx.write_csv("lower_bounds.csv",
                  ["strategy", "T", "point", "sigma", "equal_wait", "eq_1T2n", "eq_1T4n", "thm5", "violations"],
                  [[r["strategy"], r["T"], repr(r["point"]), repr(r["sigma"]), int(r["equal_wait"]),
                    fmt(r["eq_1T2n"]), fmt(r["eq_1T4n"]), fmt(r["thm5"]), ";".join(r["violations"])] for r in rows])
    bad = [r for r in rows if r["violations"]]
    ctx.check("lower-bound violations", len(bad), 0, not bad, "measured + 4 sigma >= bound", "derived")
    table = bounds.bounds_table(BUNDLED_N, range(0, 4 * BUNDLED_N + 1, 128))
    ctx.write_csv("bounds_table.csv", list(bounds.BOUND_COLUMNS),
                  [[r[c] if isinstance(r[c], (int, str)) else repr(r[c]) for c in bounds.BOUND_COLUMNS] for r in table])


def recipe_graphs(ctx: RecipeContext):
    out = {}
    trials = 10_000 if ctx.quick else 100_000
    # circulant velocity strategy
    for i, (n, k) in enumerate([(7, 2), (11, 3), (31, 5)]):
        f = graphs.circulant_exact_failure(n, k, n)
        cfg = ctx.sim(n=n, T=n, trials=trials, seed=ctx.sub_seed(0, i), strategy="velocity", graph=f"circulant:{n}:{k}")
        e = estimate_failure(cfg)
        sigma = math.sqrt(float(f) * (1 - float(f)) / e.trials)
        ctx.check(f"circulant({n},{k}) exact <= 1/(2k+1)", str(f), f"1/{2 * k + 1}", f <= Fraction(1, 2 * k + 1),
                  "exact", "reference")
        ctx.check(f"circulant({n},{k}) Monte Carlo vs enumeration", e.point, float(f),
                  _within(e.point, float(f), 4 * sigma), "4 sigma", "derived")
        out[f"circulant_{n}_{k}"] = {"exact": str(f), "estimate": e.to_json()}
    # direction-switching walk on the cycle
    n = 600
    Ts = [k * n // 2 for k in range(0, 7)]
    cfg = ctx.sim(n=n, T=max(Ts), trials=trials, seed=ctx.sub_seed(1), strategy="alpern", graph=f"cycle:{n}",
                  edge_meeting=True)
    ests = failure_curve(cfg, Ts)
    curve = []
    z = simultaneous_z(len(Ts) - 1)
    for k, (T, e) in enumerate(zip(Ts, ests)):
        if k >= 1:
            ok = within_wilson(e.point, e.trials, 2.0 ** -k, z)
            ctx.check(f"cycle failure at T={k}n/2", e.point, 2.0 ** -k, ok, f"Wilson, joint 95% over {len(Ts) - 1} points",
                      "reference")
        lb = graphs.cycle_lower_bound(T, n)
        ctx.check(f"cycle failure at T={T} above the 3^(-6T/n) bound", e.point, lb, e.point >= lb, ">=", "derived")
        curve.append(e.to_json())
    m = estimate_expected_time(cfg)
    ctx.check("cycle E[tau]/n", m.point / n, 0.75, 0.73 <= m.point / n <= 0.77, "[0.73, 0.77]", "reference")
    out["cycle_600"] = {"curve": curve, "expected_time": m.to_json()}
    # simulated code on the hypercube
    dim = 8 if ctx.quick else 10
    G = graphs.Hypercube(dim)
    plan = graphs.hamiltonian_plan(G, 5)
    cfg = ctx.sim(n=G.n, T=plan.length, trials=trials // 2, seed=ctx.sub_seed(2), strategy="hamcode:k=5",
                  graph=f"hypercube:{dim}")
    e = estimate_failure(cfg)
    sigma = binomial_sigma(e.point, e.trials)
    ctx.check(f"hypercube({dim}) code failure", e.point, 0.2, e.point <= 0.2 + 4 * sigma, "<= 1/5 + 4 sigma", "reference")
    out[f"hypercube_{dim}"] = {"length": plan.length, "estimate": e.to_json()}
    ctx.write_json("graphs.json", out)


@dataclass(frozen=True)
class Recipe:
    name: str
    run: Callable
    summary: str


RECIPES = {r.name: r for r in [
    Recipe("codes", recipe_codes, "verify binary, padded and base-B codes exhaustively"),
    Recipe("exact-small", recipe_exact_small, "exact failure of the d=2 code and derangement permanents"),
    Recipe("avoidance", recipe_avoidance, "permutation avoidance versus exp(-|Z|/m)"),
    Recipe("phase-transition", recipe_phase_transition, "binary-code failure versus T/n"),
    Recipe("aw-constants", recipe_aw_constants, "Anderson-Weber constants and expected-time integrals"),
    Recipe("expected-time", recipe_expected_time, "E[tau]/n for AW, the base-2 code and Wait For Mommy"),
    Recipe("lower-bounds", recipe_lower_bounds, "measured failure of bundled strategies against the lower bounds"),
    Recipe("graphs", recipe_graphs, "circulant, cycle and hypercube strategies"),
]}


class UnknownRecipe(KeyError):
    pass


def run_recipe(name: str, outdir, seed: int = 0, quick: bool = False, threads: Optional[int] = None) -> RecipeContext:
    if name not in RECIPES:
        raise UnknownRecipe(name)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    ctx = RecipeContext(seed=seed, quick=quick, threads=threads, outdir=outdir)
    RECIPES[name].run(ctx)
    ctx.write_json(f"{name}.summary.json", {
        "version": __version__,
        "recipe": name,
        "config": {"seed": seed, "quick": quick, "backend": "any"},
        "passed": all(c.passed for c in ctx.checks),
        "checks": [c.to_json() for c in ctx.checks],
        "files": sorted(p.name for p in ctx.files),
    })
    return ctx
