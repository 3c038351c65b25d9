"""Exception taxonomy shared across the pipeline.

Every failure the pipeline can signal deliberately derives from
:class:`PipelineError` so the CLI can map failures to stable exit codes.
"""


class PipelineError(Exception):
    """Base class for all deliberate pipeline failures."""


class MissingFileError(PipelineError):
    """A required input file or directory does not exist."""


class SchemaError(PipelineError):
    """Metadata header or structure does not match the documented schema."""


class ParseError(PipelineError):
    """A value could not be parsed into the documented type."""


class EmptyInputError(PipelineError):
    """An operation received an empty collection it cannot work with."""


class InvalidSpecError(PipelineError):
    """A filter or generator specification is internally inconsistent."""


class TooShortError(PipelineError):
    """A signal is too short for the requested operation."""


class NoValleysError(PipelineError):
    """Valley detection found no valleys at all."""


class NoPeakError(PipelineError):
    """A cycle has no identifiable peak (all samples equal)."""


class DegenerateCycleError(PipelineError):
    """A cycle has zero duration or zero amplitude range."""


class MissingMetadataError(PipelineError):
    """A required metadata field is absent and imputation is disabled."""


class SingleClassError(PipelineError):
    """Training or scoring data contains only one class."""


class EmptyClassError(PipelineError):
    """A class has no members where at least one is required."""


class NonFiniteError(PipelineError):
    """An array that must be finite contains NaN or infinity."""


class LengthMismatchError(PipelineError):
    """Two arrays that must agree in length do not."""


class TooFewSubjectsError(PipelineError):
    """Not enough subjects per class to build the requested fold plan."""


class ConfigError(PipelineError):
    """A configuration document is malformed or holds unknown keys."""
