"""Exception hierarchy shared across the package."""


class CPBoundsError(Exception):
    """Base class for all errors raised by cpbounds."""


class InputError(CPBoundsError, ValueError):
    """Malformed or out-of-domain user input."""


class NumericalError(CPBoundsError, ArithmeticError):
    """A quadrature or linear-algebra step failed to converge.

    Attributes
    ----------
    estimate : object
        Best value reached before giving up (may be ``None``).
    error : float or None
        Error bound attached to ``estimate``.
    """

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class InvariantViolation(CPBoundsError, AssertionError):
    """A mathematical invariant that must hold exactly was broken."""
