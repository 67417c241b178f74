"""Exception types shared across the pipeline."""


class GapSearchError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(GapSearchError):
    """An input value violates a documented precondition."""


class AlignmentError(GapSearchError):
    """Two collections that must share sentence ids do not."""


class CorpusFormatError(GapSearchError):
    """The corpus stream is unusable (e.g. mostly malformed lines)."""


class SnapshotError(GapSearchError):
    """A persisted index snapshot is corrupt or incompatible."""


class NotFoundError(GapSearchError):
    """A requested entity or sentence is not in the index."""
