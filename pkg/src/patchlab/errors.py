"""Error types shared across the package."""


class PatchLabError(Exception):
    pass


class UnsupportedFormatError(PatchLabError, ValueError):
    """Input file format we deliberately refuse (e.g. 16-bit sources)."""


class CorruptImageError(PatchLabError, ValueError):
    """File claims a supported format but its contents do not parse."""


class DimensionMismatchError(PatchLabError, ValueError):
    """Two rasters that must share dimensions do not."""


class WrongStateError(PatchLabError, RuntimeError):
    """Operation invoked on a job whose state does not permit it."""


class QuotaNotMetError(PatchLabError, RuntimeError):
    """Job advance requested while the current stage still awaits votes."""


class UnknownEntityError(PatchLabError, KeyError):
    """Lookup of a job, worker, task or page token that does not exist."""


class DuplicateSubmissionError(PatchLabError, RuntimeError):
    """A page token was already answered."""


class LeaseExpiredError(PatchLabError, RuntimeError):
    """Submission arrived after the page lease TTL elapsed."""


class SubmissionMismatchError(PatchLabError, ValueError):
    """Submission payload inconsistent with the issued page."""


class DegeneratePolygonError(PatchLabError, ValueError):
    """Polygon has too few vertices, zero area, or out-of-bounds points."""


class SimulationStalledError(PatchLabError, RuntimeError):
    """No worker can make progress but jobs are not terminal."""
