"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines inline.
The cutoff-doubling sub-check of criterion 6 is implemented exactly as
stated and is expected to fail: the strict integer inequality is broken by
ceiling rounding at small masses (see tests/test_chaining.py for the
variants that do hold exhaustively, and the README note).
"""

import math
import time

import numpy as np
import pytest

from tensorconc import (
    ComponentEnsemble,
    CorrelationMode,
    DenseTensor,
    SeededStream,
    SpectrumSpec,
    coordinate_cutoffs,
    dudley_bound,
    gaussian_width_proxy,
    greedy_gamma2_upper,
    hoeffding_rearrangement_check,
    hopm_operator_norm,
    log_factor_probe,
    matrix_operator_norm,
    net_oracle_norm,
    order_stats_check,
    sample_batch,
)
from tensorconc.chaining import FiniteFunctionClass, ScalarLaw
from tensorconc.experiments import ExperimentPlan, exponent_fit, ratio_sweep, run_plan, summarize
from tensorconc.store import ResultStore, run_sweep


def check(label, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] {label}: {detail}"
    print(line)
    assert passed, line


def identity_ensembles(*dims, family="gaussian"):
    return tuple(ComponentEnsemble(d, SpectrumSpec.identity(d), family) for d in dims)


def test_criterion_1_solver_oracle_equivalence():
    start = time.time()
    base = SeededStream(2024, experiment_id="accept-1")

    worst_p2 = 0.0
    for i in range(200):
        st = base.trial(i)
        shape_rng = st.component("shape").generator()
        d1, d2 = int(shape_rng.integers(2, 9)), int(shape_rng.integers(2, 9))
        n = int(shape_rng.integers(4, 33))
        T = sample_batch(identity_ensembles(d1, d2), CorrelationMode.independent(), n, st)
        a = matrix_operator_norm(T, tol=1e-12).value
        b = hopm_operator_norm(T, restarts=4, tol=1e-13, stream=st.component("solver")).value
        worst_p2 = max(worst_p2, abs(a - b) / a)

    worst_p3 = 0.0
    for i in range(50):
        st = base.trial(1000 + i)
        d = 2 if i % 2 == 0 else 3
        n = int(st.component("shape").generator().integers(4, 17))
        T = sample_batch(identity_ensembles(d, d, d), CorrelationMode.independent(), n, st)
        h = hopm_operator_norm(T, restarts=32, stream=st.component("solver")).value
        net = net_oracle_norm(DenseTensor.from_rank_one_sum(T), 0.01)
        worst_p3 = max(worst_p3, abs(h - net) / net)

    elapsed = time.time() - start
    check("criterion 1 (solver oracle equivalence)",
          worst_p2 <= 1e-8 and worst_p3 <= 0.03 and elapsed < 120,
          f"p=2 worst rel diff {worst_p2:.2e} <= 1e-8; "
          f"order-3 worst net gap {worst_p3:.4f} <= 0.03; {elapsed:.0f}s < 120s")


def test_criterion_2_max_product_rates():
    start = time.time()
    results = []
    ok = True
    for s in (1, 2, 3):
        plan = ExperimentPlan(
            experiment_id=f"accept-2-s{s}", n_grid=tuple(2**k for k in range(4, 15)),
            trials=512, statistic="gaussian_max_product", params=(("s", float(s)),),
            master_seed=11)
        sums = summarize(plan, run_plan(plan))
        fit = exponent_fit([x.n for x in sums], [x.mean for x in sums], "log_log_n")
        results.append(f"s={s}: slope {fit.slope:.3f} (target {s / 2}), se {fit.slope_stderr:.3f}")
        ok = ok and abs(fit.slope - s / 2.0) <= 0.15 and fit.slope_stderr < 0.08
    elapsed = time.time() - start
    check("criterion 2 (max-product scaling rates)", ok and elapsed < 300,
          "; ".join(results) + f"; {elapsed:.0f}s < 300s")


def test_criterion_3_log_phenomenon_probe():
    start = time.time()
    fit, _ = log_factor_probe(64, tuple(2**k for k in range(8, 17)), trials=1024, master_seed=0)
    elapsed = time.time() - start
    check("criterion 3 (asymmetric log-factor probe)",
          0.35 <= fit.slope <= 0.65 and elapsed < 900,
          f"residual exponent {fit.slope:.3f} in [0.35, 0.65] "
          f"(target 0.5, se {fit.slope_stderr:.3f}); {elapsed:.0f}s < 900s")


def test_criterion_4_two_sided_ratio_stability():
    details = []
    ok = True
    all_ratios = []
    for dims in ((8, 8), (64, 4)):
        plan = ExperimentPlan(
            experiment_id=f"accept-4-{dims[0]}x{dims[1]}",
            n_grid=tuple(2**k for k in range(6, 13)), ensembles=identity_ensembles(*dims),
            trials=64, restarts=4, statistic="deviation_norm", master_seed=0)
        sweep = ratio_sweep(plan)
        spread = sweep.max_ratio / sweep.min_ratio
        ok = ok and spread <= 3.0
        all_ratios.extend(sweep.ratios)
        details.append(f"d={dims}: max/min {spread:.2f}")
    recorded_c = max(all_ratios)
    ok = ok and all(r <= recorded_c for r in all_ratios)
    check("criterion 4 (two-sided ratio stability)", ok,
          "; ".join(details) + f"; recorded C = {recorded_c:.3f} across both configurations")


def test_criterion_5_covariance_sanity():
    plan = ExperimentPlan(
        experiment_id="accept-5", n_grid=(1024,), ensembles=identity_ensembles(32, 32),
        correlation=CorrelationMode.shared_core(1.0), trials=64, restarts=4,
        statistic="deviation_norm", master_seed=0)
    s = summarize(plan, run_plan(plan))[0]
    ratio = s.mean / math.sqrt(32.0 / 1024.0)
    rel_se = s.stderr / s.mean
    check("criterion 5 (covariance deviation shape)",
          1.0 <= ratio <= 4.0 and rel_se < 0.05,
          f"mean/sqrt(d/N) = {ratio:.2f} in [1, 4]; stderr/mean = {rel_se:.3f} < 0.05")


def test_criterion_6a_inequality_suites():
    rng = np.random.default_rng(0)
    trials = 4096
    sigma = math.sqrt(0.25 / trials)

    worst = {}
    ok = True
    for t in (1.0, 2.0, 3.0):
        worst[t] = 0.0
        for _ in range(20):
            z = rng.standard_normal(int(rng.integers(5, 40)))
            k = int(rng.integers(0, z.size + 1))
            rate = hoeffding_rearrangement_check(z, k, t, trials=trials, rng=rng)
            worst[t] = max(worst[t], rate)
        ok = ok and worst[t] <= 2.0 * math.exp(-t * t / 2.0) + 3.0 * sigma
    hoeff = "; ".join(f"t={t:g}: worst {worst[t]:.4f}" for t in worst)

    order_details = []
    for w in (4.0, 8.0):
        for n in (256, 1024):
            rate = order_stats_check(ScalarLaw.gaussian(), n, w, c0=1.0, trials=trials, rng=rng)
            se = math.sqrt(max(rate * (1 - rate), 1.0 / trials) / trials)
            ok = ok and rate <= math.exp(-w) + 3.0 * se
            order_details.append(f"w={w:g},N={n}: rate {rate:.5f}")

    check("criterion 6a (sign-flip and order-statistic tails)", ok,
          hoeff + " | " + "; ".join(order_details))


def test_criterion_6b_cutoff_doubling_as_stated():
    # exact statement under test: j_s > 2 j_(s-1) whenever 1 < j_(s-1) and
    # j_s < N + 1, exhaustively over the stated grid.  Expected to FAIL:
    # the ceiling in the integer cutoff formula breaks strict doubling at
    # small masses (first counterexample printed below); the pre-rounding
    # ratio and the shifted form (j_s - 1) >= 2 (j_(s-1) - 1) do hold
    # exhaustively (verified in tests/test_chaining.py).
    violations = []
    for c0 in (0.5, 1.0, 2.0):
        for u in (1.0, 2.0, 4.0):
            for p in (2, 3, 4):
                for n in (100, 1000, 10000):
                    vals = coordinate_cutoffs(u, p, n, range(0, 40), c0=c0).values
                    for i in range(1, len(vals)):
                        if 1 < vals[i - 1] and vals[i] < n + 1 and not vals[i] > 2 * vals[i - 1]:
                            violations.append((c0, u, p, n, i, vals[i - 1], vals[i]))
    detail = (f"{len(violations)} grid points violate strict integer doubling; "
              f"first: c0={violations[0][0]}, u={violations[0][1]}, p={violations[0][2]}, "
              f"N={violations[0][3]}, s={violations[0][4]}: "
              f"j=({violations[0][5]}, {violations[0][6]})") if violations else "holds"
    check("criterion 6b (strict integer cutoff doubling, as stated)",
          len(violations) == 0, detail)


def test_criterion_7_log_concave_ratio():
    plan = ExperimentPlan(
        experiment_id="accept-7", n_grid=tuple(2**k for k in range(6, 13)),
        ensembles=identity_ensembles(16, 16, family="laplace_isotropic"),
        trials=64, restarts=4, statistic="deviation_norm", master_seed=0)
    sweep = ratio_sweep(plan)
    recorded_c = sweep.max_ratio
    spread = sweep.max_ratio / sweep.min_ratio
    check("criterion 7 (log-concave one-sided ratio)",
          all(r <= recorded_c for r in sweep.ratios) and spread <= 5.0,
          f"recorded C = {recorded_c:.3f}; max/min = {spread:.2f} <= 5")


def test_criterion_8_chaining_proxies():
    rng = np.random.default_rng(1)
    ok = True
    width_details = []
    for d in (2, 8, 32):
        mean, se = gaussian_width_proxy("sphere", SpectrumSpec.identity(d), trials=4000, rng=rng)
        target = math.sqrt(2.0) * math.exp(math.lgamma((d + 1) / 2.0) - math.lgamma(d / 2.0))
        ok = ok and abs(mean - target) < 3.0 * se
        width_details.append(f"d={d}: {mean:.3f} vs {target:.3f} (3se={3 * se:.3f})")

    ratios = []
    for _ in range(100):
        cls = FiniteFunctionClass(rng.standard_normal((32, 5)), SpectrumSpec.identity(5))
        g, _ = greedy_gamma2_upper(cls)
        dud = dudley_bound(cls)
        ratios.append(g / dud)
    bracket_ok = all(0.25 <= r <= 4.0 for r in ratios)
    ok = ok and bracket_ok
    check("criterion 8 (chaining proxies)",
          ok,
          "; ".join(width_details)
          + f" | gamma2/dudley in [{min(ratios):.3f}, {max(ratios):.3f}] within [1/4, 4]")


def test_criterion_9_determinism(tmp_path):
    plan = ExperimentPlan(
        experiment_id="accept-9", n_grid=(16, 32), ensembles=identity_ensembles(4, 4),
        trials=8, restarts=4, statistic="deviation_norm", master_seed=123)
    logs = {}
    for tag, workers in (("w1", 1), ("w8", 8), ("again", 1)):
        run_sweep(plan, tmp_path / tag, workers=workers, plot=False)
        logs[tag] = (ResultStore(tmp_path / tag, plan.experiment_id).log_path).read_bytes()
    identical = logs["w1"] == logs["w8"] == logs["again"]
    check("criterion 9 (byte-identical reruns at worker counts 1 and 8)", identical,
          f"{len(logs['w1'])} bytes, identical across runs: {identical}")
