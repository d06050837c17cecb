"""Exception types shared across the package.

Every error raised by the library carries a short category string that the
command line front end prints, so failures can be grepped and scripted
against.
"""


class PipelineError(Exception):
    """Base class for all vesselwave errors."""

    category = "error"


class ParameterError(PipelineError):
    """An argument is outside its documented domain."""

    category = "parameter"


class DataError(PipelineError):
    """Input data violates a precondition (non-finite values, bad range, ...)."""

    category = "data"


class DatasetError(PipelineError):
    """A dataset directory is missing files or is inconsistently paired."""

    category = "dataset"


class TrainingError(PipelineError):
    """Classifier training failed (degenerate features, collapsed component)."""

    category = "training"


class ModelError(PipelineError):
    """A persisted model file cannot be used (version or kind mismatch)."""

    category = "model"
