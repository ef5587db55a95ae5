"""Exception types shared across the pipeline.

Every error carries a human-readable message; the HTTP service surfaces
these messages verbatim in 422 responses.
"""


class SemnavError(Exception):
    """Base class for all semnav errors."""


class RasterFormatError(SemnavError):
    """Malformed PGM/PPM bytes. Carries the byte offset of the defect."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class LabelDomainError(SemnavError):
    """A label value is neither a palette class id nor the UNLABELED sentinel."""


class EmptyLabelsError(SemnavError):
    """An operation that needs labeled pixels got a raster with none."""


class DimensionMismatchError(SemnavError):
    """Two grids that must share dimensions do not."""


class EmptyMaskError(SemnavError):
    """A pooling mask has no foreground cells."""


class DivergenceError(SemnavError):
    """Training produced a non-finite loss or gradient."""


class EpisodeConstructionError(SemnavError):
    """No legal few-shot episode can be built from the given dataset."""


class UntrainedHeadError(SemnavError):
    """A few-shot head with all-zero parameters was loaded for inference."""


class DemoValidationError(SemnavError):
    """A demonstration path violates adjacency, goal, or horizon constraints."""


class NoRouteError(SemnavError):
    """Goal unreachable from start (infinite-cost barrier)."""


class WorkspaceError(SemnavError):
    """Registry or workspace state violation."""
