"""Exception hierarchy shared by the numerical modules."""


class ZrpError(Exception):
    """Base class for every error raised by this package."""


class DomainError(ZrpError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class PoleError(DomainError):
    """Argument too close to a pole of the evaluated function."""


class LandauPoleError(PoleError):
    """Scaled energy sits on a Landau level, where the zero-field denominator diverges."""

    def __init__(self, level, e_tilde):
        self.level = level
        self.e_tilde = e_tilde
        super().__init__(
            f"E = {e_tilde!r} lies on Landau level n = {level} (E = {2 * level + 1})"
        )


class FieldTooWeakError(DomainError):
    """The contour truncation point needed for this field exceeds the hard cap."""

    def __init__(self, needed, cap):
        self.needed = needed
        self.cap = cap
        super().__init__(
            f"field too weak for contour quadrature: truncation {needed:.4g} "
            f"exceeds cap {cap:.4g}"
        )


class InfiniteLifetimeError(DomainError):
    """A bound state (Im E >= 0) has no decay time."""


class ConvergenceError(ZrpError, ArithmeticError):
    """An iterative numerical procedure failed to meet its tolerance.

    ``result`` holds the best iterate when one exists, ``residual`` its
    residual magnitude.
    """

    def __init__(self, message, result=None, residual=None):
        self.result = result
        self.residual = residual
        super().__init__(message)


class DegenerateError(ConvergenceError):
    """Singular derivative or Jacobian."""


class DomainExitError(ConvergenceError):
    """An iterate left the region where the equations are defined."""


class AccuracyError(ConvergenceError):
    """Quadrature did not reach its tolerance within the subdivision budget."""


class ScanError(ZrpError):
    """Too many grid cells failed to evaluate."""
