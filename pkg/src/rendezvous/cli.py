"""Command-line entry point: ``rdv <command> ...``.

Exit codes: 0 success, 1 a comparison or verification failed, 2 usage error.
``RDV_SEED`` in the environment overrides ``--seed``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from rendezvous import __version__, bounds, codes, exact, recipes, strategies
from rendezvous._backend import backend_name
from rendezvous.core import DomainError, WalkSchedule
from rendezvous.graphs import parse_graph
from rendezvous.sim import (SWEEP_HEADER, SimConfig, estimate_expected_time, estimate_failure, sweep)

log = logging.getLogger("rendezvous")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _seed(args) -> int:
    env = os.environ.get("RDV_SEED")
    if env is not None and env.strip():
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"RDV_SEED must be an integer, got {env!r}")
    return int(args.seed)


def parse_grid(text: str) -> list:
    """``a:b:step`` (inclusive of b when it lands on the grid) or a comma list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError("grid must look like start:stop:step")
        a, b, step = (float(p) for p in parts)
        if step <= 0:
            raise UsageError("grid step must be positive")
        count = int(np.floor((b - a) / step + 1e-9)) + 1
        vals = [a + i * step for i in range(max(count, 0))]
    else:
        vals = [float(v) for v in text.split(",") if v.strip()]
    if not vals:
        raise UsageError("empty grid")
    return [int(v) if float(v).is_integer() else v for v in vals]


def _labels(text: str) -> tuple:
    return tuple(int(v) for v in text.replace(" ", "").split(",") if v)


def _emit(payload, out):
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _meta(config: dict, seed=None) -> dict:
    d = {"version": __version__, "config": config}
    if seed is not None:
        d["seed"] = seed
    return d


# ---------------------------------------------------------------------------


def _build_code(args) -> codes.RendezvousCode:
    fam = args.family
    if fam == "binary":
        return codes.build_binary_code(args.d)
    if fam == "padded":
        return codes.build_padded_code(args.n)
    if fam in ("baseB", "baseb"):
        return codes.build_base_b_code(args.A, args.B, args.k, args.shuffle_seed)
    raise UsageError(f"unknown code family {fam!r}")


def cmd_code_gen(args):
    code = _build_code(args)
    _emit(code.to_json(), args.out)
    return EXIT_OK


def cmd_code_verify(args):
    if args.file:
        code = codes.RendezvousCode.from_json(json.loads(Path(args.file).read_text()))
    else:
        code = _build_code(args)
    w = codes.verify_rendezvous_code(code)
    bad = w.first_violation()
    payload = {"n": code.n, "T": code.T, "rows": code.size, "valid": w.valid,
               "pairs_checked": len(w.pairs), "violations": len(w.violations()),
               "first_violation": None if bad is None else bad.to_json()}
    _emit(payload, args.out)
    return EXIT_OK if w.valid else EXIT_FAIL


def cmd_exact_pair(args):
    x = WalkSchedule(args.n, _labels(args.x))
    y = WalkSchedule(args.n, _labels(args.y))
    T = args.T if args.T is not None else min(len(x), len(y))
    p = exact.exact_pair_failure(x, y, T)
    _emit({**_meta({"n": args.n, "x": list(x.steps), "y": list(y.steps), "T": T}), "failure": p.to_json()}, args.out)
    return EXIT_OK


def cmd_exact_strategy(args):
    s = strategies.parse_strategy(args.strategy)
    if isinstance(s, strategies._CodeStrategy):
        s = strategies.code_strategy_from(s.code)
    if not hasattr(s, "weighted_schedules"):
        raise UsageError("exact evaluation needs a finite-support or code strategy")
    p = exact.exact_strategy_failure(s, args.T)
    _emit({**_meta({"strategy": s.to_json(), "T": args.T}), "failure": p.to_json()}, args.out)
    return EXIT_OK


def cmd_exact_permanent(args):
    if args.matrix:
        rows = [r for r in args.matrix.split(";") if r]
        a = np.array([[int(c) for c in r.replace(",", "")] for r in rows], dtype=np.int64)
    elif args.file:
        a = np.array(json.loads(Path(args.file).read_text()), dtype=np.int64)
    else:
        raise UsageError("give --matrix or --file")
    if a.ndim != 2 or a.shape[0] != a.shape[1] or not np.isin(a, (0, 1)).all():
        raise UsageError("expected a square 0/1 matrix")
    zs = frozenset((int(r), int(c)) for r, c in zip(*np.nonzero(a == 0)))
    M = exact.ResidualMatrix(a.shape[0], zs)
    _emit({"m": M.m, "zeroes": len(zs), "permanent": exact.permanent(M)}, args.out)
    return EXIT_OK


def _sim_config(args, seed, **over) -> SimConfig:
    kw = dict(n=args.n, T=args.T, trials=args.trials, seed=seed, strategy=args.strategy,
              strategy2=getattr(args, "strategy2", None), graph=getattr(args, "graph", None),
              edge_meeting=getattr(args, "edge_meeting", False),
              distinct_rows_only=getattr(args, "distinct_rows", False),
              threads=args.threads, batch_size=getattr(args, "batch_size", None))
    kw.update(over)
    return SimConfig(**kw)


def _run_sim(cfg: SimConfig, args):
    if args.out in ("json", "csv"):
        # ``--out json`` / ``--out csv`` select the format and write to stdout
        args.format, args.out = args.out, None
    est = estimate_expected_time(cfg) if args.expected_time else estimate_failure(cfg)
    kind = "expected_time" if args.expected_time else "failure"
    if args.format == "csv":
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["quantity", "point", "ci_low", "ci_high", "trials", "seed"])
        w.writerow([kind, repr(est.point), repr(est.ci_low), repr(est.ci_high), est.trials, est.seed])
    else:
        _emit({**_meta(cfg.to_json(), cfg.seed), "quantity": kind, "estimate": est.to_json()}, args.out)
    return EXIT_OK


def cmd_simulate(args):
    return _run_sim(_sim_config(args, _seed(args)), args)


def cmd_graph_sim(args):
    G = parse_graph(args.graph)
    args.n = G.n
    return _run_sim(_sim_config(args, _seed(args)), args)


def cmd_sweep(args):
    seed = _seed(args)
    grid = parse_grid(args.grid)
    T = args.T if args.T is not None else args.n
    cfg = _sim_config(args, seed, T=T)
    rows = sweep(cfg, args.axis, grid)
    out = sys.stdout if args.out in (None, "-") else open(args.out, "w", newline="")
    try:
        out.write(f"# version={__version__} axis={args.axis} config={json.dumps(cfg.to_json(), sort_keys=True)}\n")
        w = csv.writer(out, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for r in rows:
            w.writerow(r.csv_row())
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_bounds_table(args):
    grid = parse_grid(args.T_grid)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(bounds.BOUND_COLUMNS)
    for r in bounds.bounds_table(args.n, [int(v) for v in grid]):
        w.writerow([r[c] if isinstance(r[c], (int, str)) else repr(r[c]) for c in bounds.BOUND_COLUMNS])
    return EXIT_OK


def cmd_recipe_list(args):
    for name, r in recipes.RECIPES.items():
        print(f"{name:18s} {r.summary}")
    return EXIT_OK


def cmd_recipe_run(args):
    if args.name not in recipes.RECIPES:
        print(f"unknown recipe {args.name!r}; available:", file=sys.stderr)
        for name in recipes.RECIPES:
            print(f"  {name}", file=sys.stderr)
        return EXIT_USAGE
    seed = _seed(args)
    outdir = Path(args.outdir) / args.name
    ctx = recipes.run_recipe(args.name, outdir, seed=seed, quick=args.quick, threads=args.threads)
    for c in ctx.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: measured={c.measured} expected={c.expected} ({c.tolerance})")
    ok = all(c.passed for c in ctx.checks)
    print(f"recipe {args.name}: {'pass' if ok else 'FAIL'}; outputs in {outdir}")
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_code_args(p, required=True):
    p.add_argument("--family", choices=["binary", "padded", "baseB"], required=required)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--A", type=int, default=1)
    p.add_argument("--B", type=int, default=2)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--shuffle-seed", type=int, default=None)


def _add_sim_args(p, need_n=True):
    if need_n:
        p.add_argument("--n", type=int, required=True)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--strategy", required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rdv", description="Symmetric rendezvous toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({backend_name()})")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    code = sub.add_parser("code", help="generate or verify rendezvous codes").add_subparsers(dest="action", required=True)
    p = code.add_parser("gen")
    _add_code_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_code_gen)
    p = code.add_parser("verify")
    p.add_argument("file", nargs="?")
    _add_code_args(p, required=False)
    p.add_argument("--out")
    p.set_defaults(func=cmd_code_verify)

    ex = sub.add_parser("exact", help="exact failure probabilities").add_subparsers(dest="action", required=True)
    p = ex.add_parser("pair")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--x", required=True, help="comma-separated labels")
    p.add_argument("--y", required=True)
    p.add_argument("--T", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_exact_pair)
    p = ex.add_parser("strategy")
    p.add_argument("--strategy", required=True)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_exact_strategy)
    p = ex.add_parser("permanent")
    p.add_argument("--matrix", help="rows of 0/1 separated by ';', e.g. 011;101;110")
    p.add_argument("--file", help="JSON list of rows")
    p.add_argument("--out")
    p.set_defaults(func=cmd_exact_permanent)

    p = sub.add_parser("simulate", help="Monte Carlo on the complete graph")
    _add_sim_args(p)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--strategy2", help="second player's strategy (asymmetric runs)")
    p.add_argument("--distinct-rows", action="store_true", help="drop trials whose first code rows coincide")
    p.add_argument("--expected-time", action="store_true")
    p.add_argument("--format", "--out-format", dest="format", choices=["json", "csv"], default="json")
    p.add_argument("--out", help="output file for JSON (default stdout); 'json' or 'csv' select a format instead")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="failure estimates over a parameter grid (CSV)")
    _add_sim_args(p)
    p.add_argument("--T", type=int)
    p.add_argument("--axis", required=True, choices=["T", "T/n", "theta", "n", "trials"])
    p.add_argument("--grid", required=True, help="start:stop:step or comma list")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    b = sub.add_parser("bounds", help="closed-form bounds").add_subparsers(dest="action", required=True)
    p = b.add_parser("table")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--T-grid", dest="T_grid", required=True)
    p.set_defaults(func=cmd_bounds_table)

    g = sub.add_parser("graph", help="rendezvous on cycles, circulants and hypercubes").add_subparsers(
        dest="action", required=True)
    p = g.add_parser("sim")
    _add_sim_args(p, need_n=False)
    p.add_argument("--graph", required=True, help="cycle:N, circulant:N:K or hypercube:D")
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--edge-meeting", action="store_true")
    p.add_argument("--expected-time", action="store_true")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--out")
    p.set_defaults(func=cmd_graph_sim)

    r = sub.add_parser("recipe", help="named experiments").add_subparsers(dest="action", required=True)
    p = r.add_parser("list")
    p.set_defaults(func=cmd_recipe_list)
    p = r.add_parser("run")
    p.add_argument("name")
    p.add_argument("--quick", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--outdir", default="rdv-results")
    p.set_defaults(func=cmd_recipe_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    log.debug("backend: %s", backend_name())
    try:
        return args.func(args)
    except (UsageError, DomainError, ValueError, KeyError, FileNotFoundError) as exc:
        print(f"rdv: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
