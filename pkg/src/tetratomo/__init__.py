"""Four-outcome (tetrahedron) qubit tomography: simulation, ML estimation and adaptive strategies."""
from .bloch import (
    REFERENCE_FRAME,
    REFERENCE_QUARTET,
    STANDARD_SIX,
    SixFrame,
    TetraFrame,
    align_frame,
    density_matrix,
    outcome_probabilities,
    random_state,
    reconstruct_pauli,
    six_state_probabilities,
)
from .clicks import ClickCounts, make_rng, sample_clicks, sample_six
from .errors import (
    AllZeroProb,
    ConfigError,
    DomainError,
    EmptyAxis,
    EmptyData,
    InvalidProbabilities,
    KappaZero,
    NonPhysicalState,
    NoRoot,
    NotOrthogonal,
    SingularInformation,
    SmallSampleWarning,
    TomographyError,
    UndefinedPostState,
    ZeroAxis,
)
from .estimation import AUTO, FORCE_BOUNDARY, Estimate, ml_estimate_clicks, ml_estimate_four, ml_estimate_six
from .harness import ExperimentConfig, run_experiment
from .metrics import predictions, uhlmann_fidelity, violation_probability
from .network import circuit_json, run_network
from .pair import TwoQubitState, orientation_dyadic, reconstruct_two_qubit

__version__ = "0.1.0"
