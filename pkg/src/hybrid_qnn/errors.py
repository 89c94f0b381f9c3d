"""Exception hierarchy shared across the package."""


class HybridQNNError(Exception):
    """Base class for all package errors."""


class ConfigurationError(HybridQNNError, ValueError):
    """Invalid sizes, ranges or flags."""


class ShapeError(HybridQNNError, ValueError):
    """Array or parameter shapes that do not fit the circuit or network."""


class DataError(HybridQNNError, ValueError):
    """Bad numeric input: non-finite values, invalid labels, degenerate ranges."""


class IngestionError(DataError):
    """A dataset file could not be read or parsed."""


class PersistenceError(HybridQNNError):
    """A model document is malformed or inconsistent."""


class VersionError(PersistenceError):
    """A model document declares an unsupported format version."""


class TrainingError(HybridQNNError, RuntimeError):
    """Training diverged (non-finite loss)."""


class ModelShapeError(PersistenceError, ShapeError):
    """A model document's arrays have the wrong sizes."""
