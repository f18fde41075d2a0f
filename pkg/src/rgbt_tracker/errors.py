"""Exception types raised across the package."""


class TrackerError(Exception):
    """Base class for every error raised by rgbt_tracker."""


class InvalidBoxError(TrackerError, ValueError):
    pass


class DegenerateBoxError(TrackerError, ValueError):
    """A box does not intersect the frame it is applied to."""


class SamplingExhaustedError(TrackerError, RuntimeError):
    """Rejection sampling ran out of its iteration budget."""


class DatasetError(TrackerError):
    pass


class MissingDirectoryError(DatasetError, FileNotFoundError):
    pass


class CountMismatchError(DatasetError, ValueError):
    pass


class MalformedAnnotationError(DatasetError, ValueError):
    def __init__(self, path, line_no, text):
        self.path = path
        self.line_no = line_no
        self.text = text
        super().__init__(f"{path}:{line_no}: cannot parse annotation {text!r}")


class ShapeMismatchError(TrackerError, ValueError):
    pass


class GradientUnavailableError(TrackerError, RuntimeError):
    pass


class NotFittedError(TrackerError, RuntimeError):
    pass


class UninitializedStateError(TrackerError, RuntimeError):
    pass


class EmptyDatasetError(TrackerError, ValueError):
    pass


class LengthMismatchError(TrackerError, ValueError):
    pass


class ConfigError(TrackerError, ValueError):
    pass


class CheckpointError(TrackerError, ValueError):
    pass
