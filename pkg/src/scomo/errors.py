"""Exception types shared across the toolkit.

Everything derives from ScomoError so callers can catch one base class.
Numeric-precondition failures subclass ValueError as well, which keeps
them compatible with plain-ValueError handling in scripts.
"""


class ScomoError(Exception):
    """Base class for all toolkit errors."""


class IngestError(ScomoError, ValueError):
    """Malformed trajectory or force-plate file."""


class FilterError(ScomoError, ValueError):
    """Low-pass filter preconditions violated (cutoff, length)."""


class EventDetectionError(ScomoError, ValueError):
    """No usable gait events in a force record."""


class SegmentationError(ScomoError, ValueError):
    """Not enough heel strikes to cut the requested cycles."""


class ModelFitError(ScomoError, ValueError):
    """PCA or sinusoid fitting failed (rank, convergence, flat spectrum)."""


class FlatSpectrumError(ModelFitError):
    """Score series has no dominant frequency to seed a sinusoid fit."""


class SynthesisError(ScomoError, ValueError):
    """Invalid input while synthesizing or displaying a gait."""


class BlendRangeError(SynthesisError):
    """Coefficient of motion outside [-5, 5]."""


class ProjectionError(SynthesisError):
    """Degenerate geometry while projecting to screen coordinates."""


class SubspaceError(ScomoError, ValueError):
    """Rank-deficient loadings or mismatched ambient dimensions."""


class GaitParamError(ScomoError, ValueError):
    """Missing events or degenerate values in gait-parameter computation."""


class StatsError(ScomoError, ValueError):
    """Bad design or insufficient data for a statistical fit."""


class SessionError(ScomoError):
    """Experiment-protocol violation (phase, ordering, duplicate keys)."""


class StageError(ScomoError):
    """A pipeline stage failed; carries the stage name for reporting."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.message = message
