"""Exception types raised across the package.

Every error that is part of a documented contract gets its own class so
callers can catch precisely what they expect; all inherit from
:class:`AiryflowError`.
"""


class AiryflowError(Exception):
    """Base class for all package-specific errors."""


class NonFiniteField(AiryflowError, ValueError):
    """A grid field contains NaN or infinite samples."""


class NonRealResult(AiryflowError):
    """An inverse transform expected to be real carries too much imaginary residue."""


class DomainError(AiryflowError, ValueError):
    """A scalar argument lies outside the function's domain."""


class UnknownShape(AiryflowError, KeyError):
    """Requested curve id is not in the shape catalog."""


class InvalidParameter(AiryflowError, ValueError):
    """A shape parameter is missing, unexpected, or out of range."""


class NoConvergence(AiryflowError):
    """Newton inversion of the arc-length function failed to converge."""


class NotRegular(AiryflowError):
    """The curve has a vanishing tangent (s_alpha <= 0 somewhere)."""


class WindingError(AiryflowError):
    """Total tangent turning is not +2*pi (clockwise or non-simple input)."""


class ClosureViolation(AiryflowError):
    """Tangent-angle state does not integrate to a closed curve."""

    def __init__(self, mean_x: float, mean_y: float, tol: float):
        self.mean_x = mean_x
        self.mean_y = mean_y
        self.tol = tol
        super().__init__(
            f"curve does not close: |mean integrand| = ({abs(mean_x):.3e}, "
            f"{abs(mean_y):.3e}) exceeds {tol:.3e}"
        )


class MissingHistory(AiryflowError):
    """A multistep update was requested without the required history level."""


class NonCommensurateTime(AiryflowError):
    """Final time is not an integer multiple of the time step."""


class BlowUp(AiryflowError):
    """The solution left the configured stability envelope."""

    def __init__(self, step: int, time: float, detail: str):
        self.step = step
        self.time = time
        self.detail = detail
        super().__init__(f"blow-up at step {step} (t={time:.6g}): {detail}")


class MissingSnapshots(AiryflowError):
    """A residual check needs exactly three consecutive states."""


class DegenerateBaseline(AiryflowError):
    """Relative drift is undefined because the baseline value is ~0."""


class NonPositiveError(AiryflowError):
    """A difference norm is below the measurable floor; no order can be formed."""


class ParseError(AiryflowError):
    """Config text is syntactically malformed."""

    def __init__(self, line: int, column: int, message: str):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class ValidationError(AiryflowError):
    """A parsed config violates an invariant."""
