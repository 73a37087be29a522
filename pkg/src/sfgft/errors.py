"""Exception hierarchy shared by the library and the CLI."""


class SfgftError(Exception):
    """Base class for all package errors."""


class NumericalError(SfgftError):
    """A numerical routine could not meet its accuracy contract."""


class NotPositiveDefiniteError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    pass


class ResidualError(NumericalError):
    """Raised when a decomposition fails its post-hoc residual check."""

    def __init__(self, message, max_residual):
        super().__init__(message)
        self.max_residual = max_residual


class InadmissiblePartitionError(NumericalError):
    pass


class EmptyBandError(SfgftError):
    pass


class InsufficientPointsError(SfgftError, ValueError):
    pass


class UndefinedSNRError(SfgftError, ValueError):
    pass


class ConfigError(SfgftError, ValueError):
    pass
