import math

import numpy as np
import pytest

from tensorconc import (
    ComponentEnsemble,
    CorrelationMode,
    SeededStream,
    SpectrumSpec,
    exponent_fit,
    log_factor_probe,
    max_gaussian_product,
    max_mixed_product,
    mc_expected_deviation,
    ratio_sweep,
    run_plan,
    sup_lower_bound_check,
)
from tensorconc.experiments import (
    ExperimentPlan,
    TrialRecord,
    mean_sqrt_product_moment,
    summarize,
)


def identity_ensembles(*dims, family="gaussian"):
    return tuple(ComponentEnsemble(d, SpectrumSpec.identity(d), family) for d in dims)


def small_plan(**overrides):
    base = dict(experiment_id="unit", n_grid=(16, 32), ensembles=identity_ensembles(3, 3),
                trials=4, restarts=2, statistic="deviation_norm", master_seed=1)
    base.update(overrides)
    return ExperimentPlan(**base)


# ---------------------------------------------------------------------------
# plan and record plumbing


def test_plan_validation():
    with pytest.raises(ValueError):
        small_plan(n_grid=())
    with pytest.raises(ValueError):
        small_plan(trials=3)
    with pytest.raises(ValueError):
        small_plan(statistic="nope")
    with pytest.raises(ValueError):
        small_plan(ensembles=())
    with pytest.raises(KeyError):
        small_plan(statistic="gaussian_max_product", ensembles=()).param("s")


def test_plan_roundtrip():
    plan = small_plan(params=(("t", 2.0),), correlation=CorrelationMode.shared_core(0.5))
    assert ExperimentPlan.from_dict(plan.to_dict()) == plan


def test_record_roundtrip_drops_wall_time():
    rec = TrialRecord("e", 16, 3, "deviation_norm", 0.25, True, 1, wall_time=2.5)
    back = TrialRecord.from_json_line(rec.to_json_line())
    assert back.value == rec.value
    assert back.key == rec.key
    assert back.wall_time == 0.0
    assert "wall" not in rec.to_json_line()


def test_records_deterministic_across_worker_counts():
    plan = small_plan()
    a = [r.to_json_line() for r in run_plan(plan, workers=1)]
    b = [r.to_json_line() for r in run_plan(plan, workers=4)]
    c = [r.to_json_line() for r in run_plan(plan, workers=1)]
    assert a == b == c


# ---------------------------------------------------------------------------
# deviation-norm estimates


def test_scalar_variance_deviation_matches_clt():
    # p=2, d=1, identical components: E|mean(Z^2) - 1| ~ 2 / sqrt(pi N)
    n = 100
    plan = ExperimentPlan(experiment_id="clt", n_grid=(n,), ensembles=identity_ensembles(1, 1),
                          correlation=CorrelationMode.shared_core(1.0), trials=256, restarts=2,
                          statistic="deviation_norm", master_seed=2)
    summary = mc_expected_deviation(plan)[0]
    target = 2.0 / math.sqrt(math.pi * n)
    assert summary.mean == pytest.approx(target, rel=0.10)


def test_deviation_shrinks_like_sqrt_n():
    plan = ExperimentPlan(experiment_id="shrink", n_grid=(2048, 4096),
                          ensembles=identity_ensembles(4, 4), trials=64, restarts=4,
                          statistic="deviation_norm", master_seed=7)
    s = mc_expected_deviation(plan)
    factor = s[0].mean / s[1].mean
    assert math.sqrt(2.0) * 0.85 <= factor <= math.sqrt(2.0) * 1.15


def test_covariance_shape_bracket():
    # p=2 identical gaussian, d=32, N=1024: mean / sqrt(d/N) in [1, 4]
    plan = ExperimentPlan(experiment_id="covshape", n_grid=(1024,),
                          ensembles=identity_ensembles(32, 32),
                          correlation=CorrelationMode.shared_core(1.0), trials=16, restarts=2,
                          statistic="deviation_norm", master_seed=3)
    s = mc_expected_deviation(plan)[0]
    assert 1.0 <= s.mean / math.sqrt(32.0 / 1024.0) <= 4.0


def test_split_half_standard_errors_are_honest():
    plan = small_plan(n_grid=(64,), trials=32, ensembles=identity_ensembles(4, 4))
    records = run_plan(plan)
    vals = np.array([r.value for r in records])
    even, odd = vals[::2], vals[1::2]
    se = math.sqrt(even.var(ddof=1) / even.size + odd.var(ddof=1) / odd.size)
    assert abs(even.mean() - odd.mean()) < 4.0 * se


# ---------------------------------------------------------------------------
# ratio sweeps


def test_ratio_invariant_under_spectrum_scaling():
    scaled = tuple(ComponentEnsemble(3, SpectrumSpec.explicit([4.0] * 3)) for _ in range(2))
    a = ratio_sweep(small_plan(n_grid=(32,), trials=8))
    b = ratio_sweep(small_plan(n_grid=(32,), trials=8, ensembles=scaled))
    # same underlying normals scaled by a power of two: statistic and bound
    # both scale by 4, leaving the ratio invariant up to solver stopping noise
    assert a.ratios[0] == pytest.approx(b.ratios[0], rel=1e-8)


def test_rademacher_ratio_near_gaussian():
    gauss = ratio_sweep(small_plan(experiment_id="rg", n_grid=(256,), trials=16,
                                   ensembles=identity_ensembles(8, 8)))
    rade = ratio_sweep(small_plan(experiment_id="rr", n_grid=(256,), trials=16,
                                  ensembles=identity_ensembles(8, 8, family="scaled_rademacher")))
    assert rade.max_ratio <= 2.0 * gauss.max_ratio


def test_laplace_plan_uses_log_concave_bound():
    from tensorconc.bounds import log_concave_bound

    sweep = ratio_sweep(small_plan(experiment_id="lap", n_grid=(64,), trials=8,
                                   ensembles=identity_ensembles(4, 4, family="laplace_isotropic")))
    assert sweep.bounds[0] == pytest.approx(log_concave_bound([4, 4], 64), rel=1e-12)


# ---------------------------------------------------------------------------
# max-product statistics


def test_max_gaussian_product_single_draw_mean():
    vals = [max_gaussian_product(1, 1, SeededStream(4, experiment_id="mp", trial_index=i))
            for i in range(2000)]
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(len(vals)))
    assert abs(mean - math.sqrt(2.0 / math.pi)) < 4.0 * se


def test_max_gaussian_product_monotone_in_n():
    means = []
    for n in (2**6, 2**12):
        vals = [max_gaussian_product(2, n, SeededStream(5, experiment_id=f"mono{n}", trial_index=i))
                for i in range(64)]
        means.append(np.mean(vals))
    assert means[1] > means[0]


def test_max_gaussian_product_classical_asymptotic():
    n = 2**16
    vals = [max_gaussian_product(1, n, SeededStream(6, experiment_id="asym", trial_index=i))
            for i in range(64)]
    ratio = float(np.mean(vals)) / math.sqrt(2.0 * math.log(n))
    assert 0.75 <= ratio <= 1.0


def test_max_mixed_product_single_sample_is_plain_product():
    # max over one sample is the product itself; mean = chi means times E|Z|
    vals = [max_mixed_product(2, (3, 5, 1), 1, SeededStream(7, experiment_id="one", trial_index=i))
            for i in range(4000)]
    chi_mean = lambda d: math.sqrt(2.0) * math.exp(math.lgamma((d + 1) / 2) - math.lgamma(d / 2))
    expected = chi_mean(3) * chi_mean(5) * math.sqrt(2.0 / math.pi)
    se = float(np.std(vals, ddof=1) / math.sqrt(len(vals)))
    assert abs(float(np.mean(vals)) - expected) < 4.0 * se


def test_max_mixed_product_coincides_with_gaussian_product_in_law():
    # t=1, p=2, d1=1: |X| is itself a folded gaussian, so the statistic has
    # the same law as the two-factor gaussian max product
    n = 64
    a = [max_mixed_product(1, (1, 1), n, SeededStream(8, experiment_id="law-a", trial_index=i))
         for i in range(400)]
    b = [max_gaussian_product(2, n, SeededStream(8, experiment_id="law-b", trial_index=i))
         for i in range(400)]
    se = math.sqrt(np.var(a, ddof=1) / len(a) + np.var(b, ddof=1) / len(b))
    assert abs(np.mean(a) - np.mean(b)) < 4.0 * se


def test_max_mixed_product_validation():
    with pytest.raises(ValueError):
        max_mixed_product(2, (3, 3), 10, SeededStream(0))
    with pytest.raises(ValueError):
        max_mixed_product(0, (3, 3), 10, SeededStream(0))


# ---------------------------------------------------------------------------
# exponent fits


def test_exponent_fit_exact_log_power():
    ns = [2**k for k in range(4, 15)]
    means = [math.log(n) ** 1.5 for n in ns]
    fit = exponent_fit(ns, means, "log_log_n")
    assert fit.slope == pytest.approx(1.5, abs=1e-9)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)


def test_exponent_fit_power_law_on_log_axis():
    ns = [2**k for k in range(4, 15)]
    means = [3.0 / math.sqrt(n) for n in ns]
    fit = exponent_fit(ns, means, "log_n")
    assert fit.slope == pytest.approx(-0.5, abs=1e-9)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)


def test_exponent_fit_flags_model_mismatch():
    # power-law data fitted on the log log axis: visibly degraded R^2
    ns = [2**k for k in range(4, 15)]
    means = [3.0 / math.sqrt(n) for n in ns]
    fit = exponent_fit(ns, means, "log_log_n")
    assert fit.r_squared < 0.99


def test_exponent_fit_validation():
    with pytest.raises(ValueError):
        exponent_fit([16, 32, 64, 128], [1, 1, 1, 1])  # too few points
    with pytest.raises(ValueError):
        exponent_fit([16, 32, 64, 128, 256], [1, 1, 1, 1, 1])  # span < 64x
    with pytest.raises(ValueError):
        exponent_fit([2**k for k in range(4, 10)], [1, 1, 0.0, 1, 1, 1])
    with pytest.raises(ValueError):
        exponent_fit([2**k for k in range(4, 10)], [1.0] * 6, "bad")


def test_maxprod_exponent_recovery_small():
    plan = ExperimentPlan(experiment_id="fit-s2", n_grid=tuple(2**k for k in range(4, 13)),
                          trials=128, statistic="gaussian_max_product", params=(("s", 2.0),),
                          master_seed=9)
    sums = summarize(plan, run_plan(plan))
    fit = exponent_fit([s.n for s in sums], [s.mean for s in sums], "log_log_n")
    assert abs(fit.slope - 1.0) <= 0.15
    assert fit.r_squared > 0.98


# ---------------------------------------------------------------------------
# lower-bound probes


def test_sup_lower_bound_p1_tracks_sqrt_n():
    rep = sup_lower_bound_check((1,), 1024, trials=8, master_seed=3, restarts=2)
    assert rep.dominant == "sqrt-n"
    assert 0.9 <= rep.estimate / rep.term_sqrt_n <= 1.1
    # per-sample: the column norm dominates the largest coordinate
    from tensorconc import projection_product_sup, sample_batch

    T = sample_batch(identity_ensembles(1), CorrelationMode.independent(), 512,
                     SeededStream(10, experiment_id="coord"))
    value = projection_product_sup(T, restarts=2).value
    assert value >= float(np.abs(T.vectors[0]).max()) - 1e-9


def test_sup_lower_bound_log_regime():
    rep = sup_lower_bound_check((16, 16, 1), 1024, trials=8, master_seed=3, restarts=8)
    assert rep.dominant == "log-augmented-product"
    assert rep.term_log_product > rep.term_sqrt_n
    assert rep.estimate >= max(rep.term_sqrt_n, rep.term_log_product) / 4.0
    assert rep.recorded_constant <= 4.0


def test_sup_lower_bound_terms_monotone_in_dims():
    a = sup_lower_bound_check((4, 4, 1), 256, trials=4, master_seed=1, restarts=2)
    b = sup_lower_bound_check((8, 8, 2), 256, trials=4, master_seed=1, restarts=2)
    assert b.term_sqrt_n == a.term_sqrt_n
    assert b.term_log_product > a.term_log_product


def test_log_factor_probe_rejects_bad_inputs():
    good_grid = tuple(2**k for k in range(8, 13))
    with pytest.raises(ValueError):
        log_factor_probe(64, good_grid, p=2)  # needs order >= 3
    with pytest.raises(ValueError) as err:
        log_factor_probe(4, (2**8, 2**10), p=3)  # log n above d_big
    assert "1024" in str(err.value) or "256" in str(err.value)
    with pytest.raises(ValueError):
        log_factor_probe(64, (2, 2**8), p=3)  # log 2 < 1


def test_jensen_inner_factor_bounded_below():
    minima = []
    for p in (2, 3):
        for n in (8, 64, 512):
            v = mean_sqrt_product_moment(p - 1, n, trials=128,
                                         stream=SeededStream(9, experiment_id=f"j{p}-{n}"))
            minima.append(v)
    assert min(minima) >= 0.5  # recorded floor; observed ~0.94


def test_sqrt_rank_floor_direction():
    # MC mean scaled by sqrt(N / max rank) stays above a positive floor
    plan = ExperimentPlan(experiment_id="sqrt-rank-floor", n_grid=(64, 256),
                          ensembles=identity_ensembles(8, 8), trials=16, restarts=4,
                          statistic="deviation_norm", master_seed=7)
    for s in mc_expected_deviation(plan):
        stat = s.mean * math.sqrt(s.n) / math.sqrt(8.0)
        assert stat >= 0.5  # recorded floor; observed ~1.8
