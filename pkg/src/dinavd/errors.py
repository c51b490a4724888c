"""Exception types raised across the package."""


class DinavdError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgument(DinavdError, ValueError):
    pass


class NotSupported(DinavdError, ValueError):
    pass


class InvalidState(DinavdError, ValueError):
    pass


class DomainError(DinavdError, ValueError):
    pass


class BoundNotApplicable(DinavdError, ValueError):
    """The preconditions of an explicit bound are not met."""


class OracleFailure(DinavdError, FloatingPointError):
    """An objective oracle returned NaN or Inf."""


class IntegrationFailure(DinavdError, RuntimeError):
    """The adaptive integrator could not advance.

    Attributes
    ----------
    t, z : float, ndarray
        Last accepted time and stacked state ``[x, y]``.
    """

    def __init__(self, message, t=None, z=None):
        super().__init__(message)
        self.t = t
        self.z = z
