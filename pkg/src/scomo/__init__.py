"""Gait body-image measurement toolkit.

Models walking kinematics with PCA, synthesizes point-light walkers
blended between a participant's own gait and a normative gait,
quantifies how far a gait lies from normative via principal angles
between model subspaces, runs the 4-day selection-session protocol with
an HTTP/JSON API, and computes the gait-parameter and statistical
analyses used to interpret the selections.
"""

from .errors import (
    BlendRangeError,
    EventDetectionError,
    FilterError,
    FlatSpectrumError,
    GaitParamError,
    IngestError,
    ModelFitError,
    ProjectionError,
    ScomoError,
    SegmentationError,
    SessionError,
    StageError,
    StatsError,
    SubspaceError,
    SynthesisError,
)
from .ingest import (
    CANONICAL_JOINTS,
    ForcePlateRecord,
    GaitCycleSet,
    GaitEvents,
    JointTrajectory,
    detect_gait_events,
    joint_columns,
    load_grf,
    load_trajectory,
    lowpass_filter,
    remove_grf_offset,
    segment_cycles,
)
from .model import (
    NORMATIVE_COMPONENTS,
    SAMPLES_PER_CYCLE,
    NormativeModel,
    ParticipantModel,
    SinusoidFit,
    fit_normative_model,
    fit_participant_model,
    fit_sinusoid,
    load_model,
    model_from_dict,
    model_to_dict,
    reconstruct_normative,
    reconstruct_participant,
    save_model,
)
from .params import (
    PARAM_NAMES,
    CorrelationReport,
    GaitParameterSet,
    ParameterCorrelation,
    compute_gait_params,
    correlate_with_scomo,
    symmetry_index,
)
from .pipeline import (
    PipelineConfig,
    run_demo,
    run_pipeline,
    run_stages,
)
from .session import (
    DAY1_START_STEPS,
    SPEED_STEP_MPS,
    VIEW_ORDER,
    ConfidenceReport,
    ExperimentSession,
    ScomoSelection,
    SessionStore,
    SliderConfig,
    Trial,
)
from .similarity import (
    DEVIATION_MEASURES,
    PrincipalAngleResult,
    Subspace,
    deviation_between,
    gait_deviation,
    orthonormal_basis,
    principal_angles,
)
from .stats import (
    MixedModelFit,
    SelectionSummary,
    fit_random_intercept,
    summarize_selections,
)
from .synthesis import (
    ALPHA_MAX,
    ALPHA_MIN,
    DISPLAY_FPS,
    VIEWS,
    CoefficientOfMotion,
    PointLightFrame,
    SynthesizedGait,
    ViewingAngle,
    animate,
    blend,
    project,
    reference_mapping,
    screen_mapping,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
