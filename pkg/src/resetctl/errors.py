"""Exception types raised across the package."""


class ResetCtlError(Exception):
    """Base class for all errors raised by resetctl."""


class DimensionError(ResetCtlError, ValueError):
    """Matrix or system dimensions are inconsistent."""


class DomainError(ResetCtlError, ValueError):
    """An argument lies outside the domain of the operation."""


class SingularityError(ResetCtlError, ArithmeticError):
    """A matrix that must be inverted is singular or badly conditioned."""


class DiscretizationError(SingularityError):
    """The bilinear transform is undefined for the given sample period."""


class DivergenceError(ResetCtlError, ArithmeticError):
    """A simulation produced non-finite values.

    Attributes
    ----------
    time : float
        Simulation time (s) at which the blow-up was detected.
    """

    def __init__(self, message, time):
        super().__init__(message)
        self.time = time


class OracleUnsettledError(ResetCtlError, RuntimeError):
    """The time-domain describing-function oracle did not reach periodicity."""


class UnsupportedTopologyError(ResetCtlError, ValueError):
    """The loop contains an algebraic loop (both feedthroughs nonzero)."""


class InvalidContextError(ResetCtlError, ValueError):
    """The base-linear closed loop is unstable, so sensitivity is meaningless."""


class GuaranteeVoidError(ResetCtlError, ValueError):
    """A reference component lies at or above the linear-range edge."""


class ConfigError(ResetCtlError, ValueError):
    """An experiment configuration is malformed or violates an invariant."""
