"""Monte Carlo toolkit for discounted convergent perpetuities.

Simulates log Y(a u) = log sum_k exp(S_k - a u k) eta_{k+1} and the perturbed
supremum Z(a u) on a shared u-grid, provides the closed-form marginal limit
laws with cross-validating samplers, and runs goodness-of-fit experiments
against them as the discount rate a tends to 0.
"""

from .distributions import (
    GammaLaw,
    IncrementModel,
    LightExp,
    ModelError,
    ParetoRV,
    QuadraticTail,
    TailModel,
    ZeroTail,
    make_gamma_law,
    make_increment_model,
    make_tail_model,
    sample_gamma,
    sample_xi,
    sample_zeta,
    tail_function,
)
from .limit_laws import (
    BmSupLaw,
    LawError,
    MixedCdfEstimate,
    MixedSupLaw,
    PppSupLaw,
    bm_sup_cdf,
    exp_functional_bm,
    mixed_sup_cdf_mc,
    ppp_sup_cdf,
    ppp_sup_quantile,
    sample_bm_sup,
    sample_mixed_sup,
    sample_ppp_sup,
)
from .perpetuity import (
    ConvexityReport,
    PerpetuityParams,
    PerpetuityRun,
    TruncationRule,
    check_convexity,
    log_sum_exp_stream,
    simulate_run,
)
from .stats import (
    KsReport,
    LimsupTrace,
    ecdf,
    ks_one_sample,
    ks_two_sample,
    lil_trace_bm_functional,
    lil_trace_perpetuity,
    lil_trace_suprema,
)
from .harness import (
    ConfigError,
    ExperimentConfig,
    NormalizerPlan,
    ReportBundle,
    config_from_dict,
    derive_replicate_seed,
    emit_reports,
    load_config,
    normalizer_plan,
    run_experiment,
    validate_config,
)

__version__ = "0.1.0"
