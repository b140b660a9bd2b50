"""Gleason-type measures over projectors and ontological models with finite contextual information."""
from .errors import (
    DimensionMismatchError,
    DomainError,
    FiniteContextError,
    InvalidProjectorError,
    InvalidTupleError,
    MembershipError,
    MissingInterfaceError,
    NormalizationError,
    NotAStateError,
    SpecError,
    SpecSyntaxError,
    UnderdeterminedError,
)
from .hilbert import (
    MeasurementTuple,
    Projector,
    RealTriple,
    basis_tuple,
    coarse_grain,
    decompose_rank1,
    haar_random_unitary,
    is_complete_tuple,
    orthogonal_complement,
    projector_from_vector,
    random_complete_tuple,
    random_unit_vector,
)
from .measures import (
    AffineMeasure,
    DensityOperator,
    FrameFunction,
    Measure,
    additivity_residual,
    affine_eval,
    born,
    born_measure,
    frame_function,
    polynomial,
    quadratic,
    radial_constraint_residual,
    radial_extension,
    random_density_operator,
)
from .dsl import load_measure, parse_measure_spec
from .gleason import (
    FitResult,
    PatchReport,
    ThirdDerivTensor,
    fit_affine,
    reconstruct_density,
    rotation_identity_residual,
    third_derivative_tensor,
    verify_lemma1,
    verify_patch_consistency,
    verify_theorem3,
)
from .ontology import (
    OmegaFamily,
    OntologicalModel,
    SequentialScenario,
    born_reproduction_check,
    check_affine_given_context,
    check_coarse_grain_closure,
    check_covering,
    check_outcome_normalization,
    check_response_consistency,
    response_probability,
    run_model_suite,
    sequential_causality_check,
)
from .protocols import (
    MODEL_REGISTRY,
    EPRSample,
    bb_model,
    deterministic_patch_model,
    estimate_correlation,
    singlet_born_correlation,
    toner_bacon_round,
)
from .report import CheckReport

__version__ = "0.1.0"
