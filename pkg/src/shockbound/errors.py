"""Exception types shared across the package."""


class ShockboundError(Exception):
    """Base class for all package errors."""


class ConvergenceFailure(ShockboundError):
    """A solve finished but its residual exceeds the acceptance tolerance."""

    def __init__(self, message, z=None, a=None, fit=None):
        super().__init__(message)
        self.z = z
        self.a = a
        self.fit = fit


class ZeroMass(ShockboundError):
    """A measure operation required positive total weight."""


class DegenerateSpread(ShockboundError):
    """A spread rescale was requested on a measure with zero variance."""


class LengthMismatch(ShockboundError):
    """A parameter vector does not match the expected layout length."""


class InfeasibleConstraint(ShockboundError):
    """A constraint could not be imposed within the available budget."""


class NonFiniteObjective(ShockboundError):
    """The objective returned non-finite values at every starting point."""


class EmptyAfterFilter(ShockboundError):
    """No values remained inside the requested [lo, hi] window."""


class BufferExhausted(ShockboundError):
    """Too many samples were discarded to reach the requested count."""
