"""Stochastic inexact splitting for structured stochastic convex programs.

Subpackages:

- problems:  problem model, G-metric, sampled augmented-Lagrangian gradients
- sa:        diminishing-step stochastic approximation and its rate constants
- solver:    the inexact outer loop with geometric batch schedules
- exact:     deterministic splitting on quadratics (contraction oracle)
- bounds:    contraction gaps, certificates, bound curves, complexity bounds
- baselines: competitor schemes, soft-thresholding, the prox-gradient reference
- synthetic: generators with closed-form moments and known solutions
- harness:   seeded replication runner, curves, CSV/JSON emission
- cli:       command-line front end
"""

from .problems import (
    GMetric,
    GProx,
    Iterate,
    KKTPoint,
    ProblemConstants,
    StochasticProblem,
    aug_lagrangian_grad_x,
    aug_lagrangian_grad_y,
    g_norm_sq,
    kkt_residual,
    zero_iterate,
)
from .sa import SAProblem, SARateConstants, compute_rate_constants, q_bound, sa_run
from .solver import (
    AlgorithmConfig,
    DerivedConstants,
    RunRecord,
    derive_constants,
    sample_schedule,
    si_admm_step,
    si_admm_step_exact_y,
    solve,
)
from .exact import (
    ContractionReport,
    QuadraticInstance,
    contraction_check,
    exact_admm_step,
    random_quadratic,
)
from .bounds import (
    BoundCertificate,
    bound_curve,
    certificate_full,
    certificate_simple,
    complexity_bound,
    delta_simple,
    delta_strongly_convex_g,
    zeta_full,
    zeta_simple,
)
from .baselines import (
    AveragedIterate,
    DsaState,
    dsa_step,
    prox_grad_reference,
    sadm0_step,
    sadm1_step,
    soft_threshold,
)
from .synthetic import (
    DistRegInstance,
    LassoInstance,
    gen_distreg,
    gen_lasso,
    isserlis_V_affine,
    isserlis_V_centered,
    variance_constants_lasso,
)

__version__ = "0.1.0"
