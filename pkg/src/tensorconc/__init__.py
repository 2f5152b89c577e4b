"""Simulation laboratory for concentration of sums of rank-one random tensors."""

from .bounds import (
    RegimeReport,
    classify_regime,
    deviation_rate,
    log_concave_bound,
    multiproduct_bound,
    tensor_deviation_bound,
)
from .chaining import (
    AdmissibleSequence,
    FiniteFunctionClass,
    GradedNormQuery,
    ScalarLaw,
    coordinate_cutoffs,
    dudley_bound,
    gaussian_width_proxy,
    graded_lq_norm,
    greedy_gamma2_upper,
    hoeffding_rearrangement_check,
    lambda_graded_value,
    linf_sup_check,
    order_stats_check,
)
from .deviation import (
    DenseTensor,
    Direction,
    PopulationSpec,
    RankOneSum,
    evaluate_form,
    hopm_operator_norm,
    projection_product_sup,
    matrix_operator_norm,
    net_oracle_norm,
    wick_population_form,
)
from .ensembles import (
    GAUSSIAN_PSI2,
    ComponentEnsemble,
    CorrelationMode,
    SpectrumSpec,
    UnsupportedFamilyError,
    effective_rank,
    sample_batch,
    subgaussian_norm_1d,
)
from .experiments import (
    ExperimentPlan,
    FitResult,
    TrialRecord,
    exponent_fit,
    log_factor_probe,
    max_gaussian_product,
    max_mixed_product,
    mc_expected_deviation,
    ratio_sweep,
    run_plan,
    sup_lower_bound_check,
)
from .store import ResultStore, run_sweep
from .streams import SeededStream

__version__ = "0.1.0"
