"""Command-line front end: bound tables, simulations, resumable sweeps,
exponent fits, and the inequality verification suite.

Config files are JSON documents with a ``version`` field; summaries are
CSV, trial logs are line-delimited JSON, plots are SVG.  Exit code is 0
iff every requested check passes.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import bounds as bmod
from . import chaining as cmod
from .ensembles import ComponentEnsemble, SpectrumSpec, effective_rank
from .experiments import ExperimentPlan, exponent_fit, run_plan, summarize
from .store import ResultStore, StoreConflictError, run_sweep, sig6

OUT_ENV_VAR = "TENSORCONC_OUT"


class ConfigError(ValueError):
    """Configuration problem, reported with the offending field path."""


def _require(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise ConfigError(f"config field {path}: {message}")


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    _require(isinstance(data, dict), "<root>", "must be a JSON object")
    return data


def _parse_spectrum(data: dict, path: str) -> SpectrumSpec:
    _require(isinstance(data, dict), path, "must be an object")
    kind = data.get("kind", "explicit")
    try:
        if kind == "identity":
            _require(int(data["dim"]) >= 1, f"{path}.dim", "must be a positive integer")
            return SpectrumSpec.identity(int(data["dim"]))
        if kind == "geometric":
            return SpectrumSpec.geometric(int(data["dim"]), float(data["ratio"]))
        if kind == "polynomial":
            return SpectrumSpec.polynomial(int(data["dim"]), float(data["exponent"]))
        if kind == "explicit":
            return SpectrumSpec.explicit(data["eigenvalues"])
    except ConfigError:
        raise
    except KeyError as exc:
        raise ConfigError(f"config field {path}.{exc.args[0]}: missing") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config field {path}: {exc}") from exc
    raise ConfigError(f"config field {path}.kind: unknown spectrum kind {kind!r}")


def _parse_plan(data: dict) -> ExperimentPlan:
    _require("experiment_id" in data, "experiment_id", "missing")
    _require("n_grid" in data, "n_grid", "missing")
    grid = data["n_grid"]
    _require(isinstance(grid, list) and len(grid) > 0, "n_grid", "must be a non-empty list")
    for i, n in enumerate(grid):
        _require(isinstance(n, int) and n >= 1, f"n_grid[{i}]", "must be a positive integer")
    ensembles = []
    for i, e in enumerate(data.get("ensembles", [])):
        spec = _parse_spectrum(e.get("spectrum", {}), f"ensembles[{i}].spectrum")
        try:
            ensembles.append(ComponentEnsemble(int(e.get("dim", spec.dim)), spec,
                                               e.get("family", "gaussian")))
        except ValueError as exc:
            raise ConfigError(f"config field ensembles[{i}]: {exc}") from exc
    payload = dict(data)
    payload["ensembles"] = [e.to_dict() for e in ensembles]
    try:
        return ExperimentPlan.from_dict(payload)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"config: {exc}") from exc


def _print_table(headers: list[str], rows: list[list[str]]) -> None:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(headers)]
    line = "  ".join(h.ljust(w) for h, w in zip(headers, widths))
    print(line)
    print("-" * len(line))
    for r in rows:
        print("  ".join(c.ljust(w) for c, w in zip(r, widths)))


def cmd_bound(args) -> int:
    config = _load_config(args.config)
    mode = config.get("mode", "spectra")
    _require("n" in config, "n", "missing")
    n = config["n"]
    _require(isinstance(n, int) and n >= 2, "n", "must be an integer >= 2")

    if mode == "classes":
        gammas = config.get("gammas")
        dpsi2 = config.get("dpsi2")
        _require(isinstance(gammas, list) and len(gammas) >= 2, "gammas", "must be a list of length >= 2")
        _require(isinstance(dpsi2, list) and len(dpsi2) == len(gammas), "dpsi2",
                 "must match gammas in length")
        value = bmod.multiproduct_bound(gammas, dpsi2, n)
        print(f"finite-class bound at N={n}: {sig6(value)}")
        return 0

    specs = [_parse_spectrum(s, f"spectra[{i}]") for i, s in enumerate(config.get("spectra", []))]
    _require(len(specs) >= 2, "spectra", "need at least two components")
    report = bmod.classify_regime(specs, n)
    rows = []
    for k, spec in enumerate(specs):
        rows.append([str(k), str(spec.dim), sig6(spec.operator_norm), sig6(spec.trace),
                     sig6(effective_rank(spec))])
    _print_table(["k", "dim", "op_norm", "trace", "eff_rank"], rows)
    print(f"log N           : {sig6(report.log_n)}")
    print(f"t (ranks >= log): {report.t}")
    print(f"sqrt term       : {sig6(report.sqrt_term)}")
    print(f"log-product term: {sig6(report.log_term)}")
    print(f"dominant        : {report.dominant}")
    print(f"rate            : {sig6(bmod.deviation_rate(specs, n))}")
    print(f"deviation bound : {sig6(bmod.tensor_deviation_bound(specs, n))}")
    if all(s.is_identity for s in specs):
        dims = [s.dim for s in specs]
        print(f"log-concave bound: {sig6(bmod.log_concave_bound(dims, n))}")
    return 0


def cmd_simulate(args) -> int:
    config = _load_config(args.config)
    plan = _parse_plan(config)
    if args.seed is not None:
        plan = ExperimentPlan.from_dict({**plan.to_dict(), "master_seed": args.seed})
    summaries = summarize(plan, run_plan(plan, workers=args.workers))
    rows = [[str(s.n), sig6(s.mean), sig6(s.stderr), sig6(s.converged_fraction),
             "low" if s.low_confidence else "ok"] for s in summaries]
    _print_table(["N", "mean", "stderr", "converged", "confidence"], rows)
    return 0


def cmd_sweep(args) -> int:
    config = _load_config(args.config)
    plan = _parse_plan(config)
    try:
        rows = run_sweep(plan, args.out, workers=args.workers, resume=args.resume)
    except StoreConflictError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _print_table(list(rows[0].keys()), [[str(v) for v in r.values()] for r in rows])
    print(f"store: {Path(args.out) / plan.experiment_id}")
    return 0


def cmd_fit(args) -> int:
    store_dir = Path(args.store)
    plan_path = store_dir / "plan.json"
    _require(plan_path.exists(), "--store", f"no plan.json under {store_dir}")
    plan = ExperimentPlan.from_dict(json.loads(plan_path.read_text()))
    records = ResultStore(store_dir.parent, store_dir.name).load_records()
    wanted = [r for r in records if r.statistic == args.statistic]
    if not wanted:
        print(f"error: no records with statistic {args.statistic!r} in {store_dir}",
              file=sys.stderr)
        return 2
    summaries = summarize(plan, wanted)
    fit = exponent_fit([s.n for s in summaries], [s.mean for s in summaries],
                       abscissa=args.abscissa)
    print(f"abscissa     : {fit.abscissa}")
    print(f"slope        : {sig6(fit.slope)} +/- {sig6(fit.slope_stderr)}")
    print(f"intercept    : {sig6(fit.intercept)}")
    print(f"R^2          : {sig6(fit.r_squared)}")
    if fit.r_squared < 0.8:
        print("warning: poor fit, the model may not match this statistic")
    return 0


def cmd_verify(args) -> int:
    c0_values = [float(c) for c in args.c0.split(",")]
    rng = np.random.default_rng(args.seed)
    failures = 0

    def report(name: str, passed: bool, detail: str) -> None:
        nonlocal failures
        status = "PASS" if passed else "FAIL"
        if not passed:
            failures += 1
        print(f"[{status}] {name}: {detail}")

    # sign-flip rearrangement bound
    for t in (1.0, 2.0, 3.0):
        worst = 0.0
        for _ in range(args.vectors):
            z = rng.standard_normal(rng.integers(5, 40))
            k = int(rng.integers(0, z.size + 1))
            rate = cmod.hoeffding_rearrangement_check(z, k, t, trials=args.trials, rng=rng)
            worst = max(worst, rate)
        sigma = math.sqrt(0.25 / args.trials)
        limit = 2.0 * math.exp(-t * t / 2.0) + 3.0 * sigma
        report(f"sign-flip bound t={t:g}", worst <= limit,
               f"worst rate {worst:.5f} <= {limit:.5f}")

    # order statistics of i.i.d. samples
    for c0 in c0_values:
        for w in (4.0, 8.0):
            for n in (256, 1024):
                rate = cmod.order_stats_check(cmod.ScalarLaw.gaussian(), n, w, c0=c0,
                                              trials=args.trials, rng=rng)
                sigma = math.sqrt(max(rate * (1 - rate), 1.0 / args.trials) / args.trials)
                limit = math.exp(-w) + 3.0 * sigma
                report(f"order stats c0={c0:g} w={w:g} N={n}", rate <= limit,
                       f"rate {rate:.5f} <= {limit:.5f}")

    # max-coordinate ratio statistic
    stats = cmod.linf_sup_check(SpectrumSpec.identity(8), n=256, trials=256, rng=rng)
    report("max-coordinate ratio", stats.maximum <= 3.0,
           f"mean {stats.mean:.3f}, max {stats.maximum:.3f} <= 3.0")

    # cutoff geometric growth: the shifted integers (j_s - 1) double, and the
    # unrounded ratio strictly exceeds 2; the strict integer form j_s > 2 j_(s-1)
    # is not checked here because ceiling slack breaks it at small masses
    ok = True
    detail = ""
    strict_edges = 0
    for c0 in c0_values:
        for u in (1.0, 2.0, 4.0):
            for p in (2, 3, 4):
                for n in (100, 1000, 10000):
                    seq = cmod.coordinate_cutoffs(u, p, n, range(0, 25), c0=c0)
                    vals = seq.values
                    for i in range(1, len(vals)):
                        if 1 < vals[i - 1] and vals[i] < n + 1:
                            if not vals[i] - 1 >= 2 * (vals[i - 1] - 1):
                                ok = False
                                detail = f"failed at c0={c0}, u={u}, p={p}, n={n}, s={seq.scales[i]}"
                            if not vals[i] > 2 * vals[i - 1]:
                                strict_edges += 1
    report("cutoff geometric growth", ok,
           detail or "(j_s - 1) >= 2 (j_(s-1) - 1) on the whole grid")
    if strict_edges:
        print(f"[NOTE] strict integer doubling j_s > 2 j_(s-1) has {strict_edges} "
              "rounding edge(s) on this grid (ceiling slack at small masses)")

    return 0 if failures == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tensorconc",
        description="Concentration laboratory for sums of rank-one random tensors")
    parser.add_argument("--out", default=None,
                        help=f"output directory (default: ${OUT_ENV_VAR} or ./results)")
    parser.add_argument("--workers", type=int, default=1, help="worker count hint")
    sub = parser.add_subparsers(dest="command", required=True)

    p_bound = sub.add_parser("bound", help="evaluate closed-form bounds from a config")
    p_bound.add_argument("--config", required=True)
    p_bound.set_defaults(func=cmd_bound)

    p_sim = sub.add_parser("simulate", help="run a plan once and print the summary")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--seed", type=int, default=None, help="override the plan's master seed")
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="run a plan with a persistent, resumable store")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--resume", action="store_true")
    p_sweep.set_defaults(func=cmd_sweep)

    p_fit = sub.add_parser("fit", help="fit a scaling exponent from a sweep store")
    p_fit.add_argument("--store", required=True)
    p_fit.add_argument("--statistic", required=True)
    p_fit.add_argument("--abscissa", choices=["log_n", "log_log_n"], default="log_log_n")
    p_fit.set_defaults(func=cmd_fit)

    p_verify = sub.add_parser("verify", help="run the inequality property suites")
    p_verify.add_argument("--c0", default="0.5,1,2", help="comma-separated c0 grid")
    p_verify.add_argument("--trials", type=int, default=4096)
    p_verify.add_argument("--vectors", type=int, default=20)
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.out is None:
        args.out = os.environ.get(OUT_ENV_VAR, "results")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
