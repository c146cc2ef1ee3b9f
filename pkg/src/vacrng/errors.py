"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Invalid parameters or input data."""


class StreamTooShortError(ValidationError):
    """A sample or bit stream is shorter than the operation's minimum."""


class NonPhysicalError(ValidationError):
    """Calibrated variances do not describe a physical source (v_m <= v_e, or v_e == 0)."""


class SampleFormatError(ValidationError):
    """A sample or bit file does not match the expected layout."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested absolute error.

    The achieved bound is kept on the exception so callers can report it.
    """

    def __init__(self, message, value=None, error_bound=None):
        super().__init__(message)
        self.value = value
        self.error_bound = error_bound
