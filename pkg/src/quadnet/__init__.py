"""Wide two-layer networks whose training couples with the quadratic Taylor term.

The package builds symmetric random-feature networks, kills the linear (NTK)
term by sign-randomizing the weight movement, and provides the risk, landscape,
optimization, expressivity, and measurement tooling around that construction.
"""

from .model import (
    Activation,
    Network,
    PairedDelta,
    relu_cubed_sixth,
    relu_power,
    init_symmetric,
    check_w0_bound,
    forward,
    f_lin,
    f_quad,
    quad_remainder,
    f_korder,
    forward_batch,
    flin_batch,
    fquad_batch,
    quad_remainder_batch,
    korder_batch,
    norm_2p,
    norm24,
    save_network,
    load_network,
)
from .randomize import (
    SignDiagonal,
    MomentPair,
    sample_signs,
    apply_signs,
    moment_pair,
    verify_moments,
    sample_pair_scales,
)
from .risk import (
    Dataset,
    LossKind,
    RiskSpec,
    logistic,
    soft_hinge,
    huber_abs,
    empirical_risk,
    randomized_risk_mc,
    clean_risk,
    reg_value,
    reg_grad,
    grad_clean,
    grad_randomized_sample,
    hessq_clean,
    hessq_clean_sigma_expect,
)
from .landscape import (
    LandscapeReport,
    clean_landscape_check,
    randomized_landscape_check,
    sosp_localize,
)
from .optimize import (
    OptConfig,
    Trajectory,
    TrainingDiverged,
    noisy_sgd,
    train_clean,
    train_linear_ntk,
)
from .express import (
    TargetTerm,
    TargetPoly,
    FitConfig,
    KernelSeries,
    kernel_value,
    kernel_coeff,
    kernel_series,
    fit_feature_coefficients,
    construct_quadratic_wstar,
    construct_korder_wstar,
)
from .measure import (
    ScanReport,
    ExperimentResult,
    gen_sphere,
    gen_hypercube,
    gen_xor2,
    gen_matrix_sensing,
    coupling_scan,
    korder_scan,
    mxop,
    feature_opnorm,
    tensor_opnorm_estimate,
    run_experiment,
)

__version__ = "0.1.0"
