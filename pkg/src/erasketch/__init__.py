"""erasketch: erasure-robust Gaussian sketching, made checkable.

Exact worst-case norm statistics under adversarial row erasures, closed-form
bounds with validity flags, reproducible Monte Carlo verification, pairwise
dimension-reduction audits, and sparse-band certification for explicit
matrices.
"""

from .core import (
    DistortionBand,
    ErasureSpec,
    Mode,
    RatioExtremes,
    SortedSample,
    brute_force_extremes,
    erased_budget,
    extreme_ratios,
    membership,
    sort_sample,
)
from .bounds import (
    BoundReport,
    BoundValue,
    GaussianConstants,
    beta_conditions_hold,
    beta_lower_bounds,
    beta_upper_bounds,
    calibrate_cg,
    chi2_tail_bound,
    gaussian_constants,
    jl_min_rows,
    lambert_w0,
    lambert_wm1,
    load_constants,
    order_stat_expectation_bounds,
    partial_sum_expectation_bounds,
    rip_admissibility,
    theta_omega_bounds,
)
from .montecarlo import (
    EstimateResult,
    QuantileResult,
    Side,
    TrialPlan,
    concentration_check,
    estimate_membership,
    estimate_quantiles,
)
from .jl import (
    Dataset,
    DistortionReport,
    ProjectionSpec,
    audit_pairwise,
    cached_projection,
    erasure_budget_jl,
    jl_hypothesis,
    load_points,
)
from .rip import (
    BernoulliDemo,
    RipWitness,
    SphereNet,
    StrongRipReport,
    bernoulli_counterexample,
    build_net,
    certify_strong_rip,
    replay_witness,
    sampled_net,
)

__version__ = "0.1.0"
