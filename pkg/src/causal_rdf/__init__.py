"""Causal rate distortion functions of finite-alphabet, finite-horizon sources."""

from .distortion import DistortionMatrix, average_distortion, cumulative_distortion
from .errors import (
    CapacityError,
    CausalRDFError,
    DegenerateDistributionError,
    DegenerateRowError,
    DistortionRangeError,
    DomainError,
    SpecError,
    SpecParseError,
)
from .oracle import OracleConfig, brute_force_lagrangian, causality_conditions, verify_causal_factorization
from .probability import (
    Alphabet,
    CausalKernelFamily,
    HistoryIndex,
    OutputKernelFamily,
    StageKernel,
    decode_history,
    encode_history,
    kl_divergence,
    normalize,
)
from .realization import RealizationReport, realize_and_estimate, sample_path
from .solver import (
    RDPoint,
    SolverConfig,
    check_distortion_equality,
    classical_for_target_distortion,
    classical_rdf,
    mutual_information,
    rdf_from_multiplier,
    solve_fixed_point,
    solve_for_target_distortion,
    sweep,
    tilted_stage_kernel,
    update_output_family,
    verify_markov_reduction,
)
from .source import (
    JointMeasure,
    JointSourceMeasure,
    SourceModel,
    build_joint,
    joint_source_measure,
    posterior_source_history,
)
from .specfile import ProblemSpec, dump_spec, load_spec, parse_spec

__version__ = "0.1.0"
