"""
sramdp
Simulator for hardware-noise local differential privacy in low-voltage SRAM
"""

# Bit-level encoding and permutation patterns
from .bitcodec import (
    Word,
    PermPattern,
    PermSet,
    CandidateSet,
    LfsrState,
    PatternSelector,
    encode,
    decode,
    encode_array,
    decode_array,
    apply_permutation,
    invert_permutation,
    lfsr_next,
    lfsr_bits,
)

# Memory cell failure models
from .memmodel import (
    CellSpec,
    FailureCurve,
    ChipInstance,
    FaultMap,
    failure_rate_at,
    sigma_vth,
    sample_chip,
    apply_drift,
    nearest_voltage,
)

# Perturbation pipeline and channels
from .mechanism import (
    FailureProfile,
    MechanismConfig,
    RandomSources,
    Channel,
    perturb,
    perturb_many,
    trace_perturb,
    effective_f,
    channel_prob,
    build_channel,
    rr_reference,
    rr_matrix,
)

from .privacy import (
    AdversaryPrior,
    PrivacyReport,
    epsilon_inf,
    f_for_epsilon,
    droop_bound,
    drift_epsilon,
    mle_infer,
    ia_meter,
    build_prior,
    privacy_report,
)

from .utility import (
    DeltaPmf,
    delta_pmf,
    delta_pmf_bruteforce,
    expected_l1,
    l1_bound_homogeneous,
    ul_meter,
    mean_ul,
)

from .recovery import (
    Distribution,
    MomentConstraints,
    EmConfig,
    RecoveryResult,
    em_recover,
    clr_recover,
)

# Experiments
from .harness import (
    ExperimentConfig,
    gen_gaussian,
    gen_grid_checkins,
    named_pattern,
    run_experiment,
    compare_rr,
    run_sweep,
)

from .reporting import (
    ResultRecord,
    ExperimentSuiteResult,
    export_report,
)

from .errors import (
    SramDpError,
    ConfigError,
    NumericError,
)

from .__version__ import __version__
__all__ = [
    # Bit-level encoding
    "Word",
    "PermPattern",
    "PermSet",
    "CandidateSet",
    "LfsrState",
    "PatternSelector",
    "encode",
    "decode",
    "encode_array",
    "decode_array",
    "apply_permutation",
    "invert_permutation",
    "lfsr_next",
    "lfsr_bits",

    # Memory models
    "CellSpec",
    "FailureCurve",
    "ChipInstance",
    "FaultMap",
    "failure_rate_at",
    "sigma_vth",
    "sample_chip",
    "apply_drift",
    "nearest_voltage",

    # Mechanism
    "FailureProfile",
    "MechanismConfig",
    "RandomSources",
    "Channel",
    "perturb",
    "perturb_many",
    "trace_perturb",
    "effective_f",
    "channel_prob",
    "build_channel",
    "rr_reference",
    "rr_matrix",

    # Privacy
    "AdversaryPrior",
    "PrivacyReport",
    "epsilon_inf",
    "f_for_epsilon",
    "droop_bound",
    "drift_epsilon",
    "mle_infer",
    "ia_meter",
    "build_prior",
    "privacy_report",

    # Utility
    "DeltaPmf",
    "delta_pmf",
    "delta_pmf_bruteforce",
    "expected_l1",
    "l1_bound_homogeneous",
    "ul_meter",
    "mean_ul",

    # Recovery
    "Distribution",
    "MomentConstraints",
    "EmConfig",
    "RecoveryResult",
    "em_recover",
    "clr_recover",

    # Experiments and reporting
    "ExperimentConfig",
    "gen_gaussian",
    "gen_grid_checkins",
    "named_pattern",
    "run_experiment",
    "compare_rr",
    "run_sweep",
    "ResultRecord",
    "ExperimentSuiteResult",
    "export_report",

    # Errors
    "SramDpError",
    "ConfigError",
    "NumericError",
]
