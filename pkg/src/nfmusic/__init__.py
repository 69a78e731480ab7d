"""MUSIC direction and range estimation under wavefront-model mismatch."""

from .channels import (
    RANGE_GUARD_FRACTION,
    ChannelMatrix,
    ModelKind,
    RangeTooSmall,
    SteeringVector,
    build_channel,
    bulk_phase,
    parabolic_path_lengths,
    planar_path_lengths,
    spherical_path_lengths,
    steering_anm,
    steering_far_field,
    steering_near_field,
)
from .estimator import (
    SPECTRUM_CAP,
    InsufficientPeaks,
    PeakEstimate,
    SearchGrid,
    SearchWorkspace,
    SourceErrors,
    SpectrumGrid,
    default_search_grid,
    match_and_score,
    pseudospectrum,
    search,
    spectrum_grid,
    write_spectrum_csv,
)
from .geometry import (
    SPEED_OF_LIGHT,
    ArrayGeometry,
    Direction,
    FraunhoferConvention,
    NotPerfectSquare,
    Position3,
    Source,
    SourceScene,
    build_upa,
    exact_delay,
    fraunhofer_distance,
    unit_vector,
)
from .harness import (
    ExperimentConfig,
    MismatchResult,
    Scenario,
    assert_thresholds,
    emit_csv,
    emit_plot,
    read_results_csv,
    run_case,
    run_sweep,
    trial_seed,
)
from .signals import (
    SimConfig,
    SnapshotBlock,
    generate,
    load_snapshots,
    sample_covariance,
    save_snapshots,
)
from .subspace import (
    ConvergenceFailure,
    EigenDecomposition,
    NoiseSubspace,
    NonHermitianInput,
    TooManySources,
    eig_hermitian,
    noise_subspace,
    orthogonal_complement,
)

__version__ = "0.1.0"

__all__ = [
    "ArrayGeometry",
    "ChannelMatrix",
    "ConvergenceFailure",
    "Direction",
    "EigenDecomposition",
    "ExperimentConfig",
    "FraunhoferConvention",
    "InsufficientPeaks",
    "MismatchResult",
    "ModelKind",
    "NoiseSubspace",
    "NonHermitianInput",
    "NotPerfectSquare",
    "PeakEstimate",
    "Position3",
    "RANGE_GUARD_FRACTION",
    "RangeTooSmall",
    "SPECTRUM_CAP",
    "SPEED_OF_LIGHT",
    "Scenario",
    "SearchGrid",
    "SearchWorkspace",
    "SimConfig",
    "SnapshotBlock",
    "Source",
    "SourceErrors",
    "SourceScene",
    "SpectrumGrid",
    "SteeringVector",
    "TooManySources",
    "assert_thresholds",
    "build_channel",
    "build_upa",
    "bulk_phase",
    "default_search_grid",
    "eig_hermitian",
    "emit_csv",
    "emit_plot",
    "exact_delay",
    "fraunhofer_distance",
    "generate",
    "load_snapshots",
    "match_and_score",
    "noise_subspace",
    "orthogonal_complement",
    "parabolic_path_lengths",
    "planar_path_lengths",
    "pseudospectrum",
    "read_results_csv",
    "run_case",
    "run_sweep",
    "sample_covariance",
    "save_snapshots",
    "search",
    "spectrum_grid",
    "spherical_path_lengths",
    "steering_anm",
    "steering_far_field",
    "steering_near_field",
    "trial_seed",
    "unit_vector",
    "write_spectrum_csv",
]
