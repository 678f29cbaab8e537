"""Exception types shared across the package."""


class SpinBfnError(Exception):
    """Base class for package-specific failures."""


class ControlSamplingError(SpinBfnError):
    """Random control synthesis kept violating the observability margin."""


class IntegrationError(SpinBfnError):
    """A fixed-step integration produced non-finite values."""


class BlowupError(SpinBfnError):
    """An observer state became non-finite or exceeded the norm ceiling."""

    def __init__(self, message, iteration=None, direction=None):
        super().__init__(message)
        self.iteration = iteration
        self.direction = direction


class GridMismatchError(SpinBfnError):
    """A measurement record's time grid does not match the configuration."""


class UnobservableControlError(SpinBfnError):
    """The linear response map is rank deficient: the control does not excite
    every state direction, so the record cannot determine the initial state."""

    def __init__(self, message, rank=None, expected_rank=None):
        super().__init__(message)
        self.rank = rank
        self.expected_rank = expected_rank
