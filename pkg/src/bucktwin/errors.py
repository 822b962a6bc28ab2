"""Exception types shared across the package."""


class BucktwinError(Exception):
    """Base class for all package errors."""


class ValidationError(BucktwinError):
    """An input violates a documented invariant or precondition."""


class InstabilityError(BucktwinError):
    """The simulator produced a non-finite state (numerical blow-up)."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ObjectiveError(BucktwinError):
    """An objective function returned NaN. Carries the offending position."""

    def __init__(self, message, position=None):
        super().__init__(message)
        self.position = position


class TrainingError(BucktwinError):
    """Training diverged (non-finite loss). Carries the epoch index."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch
