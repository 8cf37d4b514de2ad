"""Exception hierarchy shared across the toolkit.

Two branches matter to callers: `InputError` for invalid data, configs, or
arguments (CLI exit code 1, HTTP 400) and `NumericsError` for failures of
the numerics themselves (CLI exit code 2, HTTP 422).
"""


class KoopmanError(Exception):
    """Base class for all toolkit errors."""


class InputError(KoopmanError, ValueError):
    """Invalid argument, shape, file, or configuration."""


class FileFormatError(InputError):
    """Malformed CSV/JSON input; message carries row/column diagnostics."""


class NumericsError(KoopmanError):
    """A numerical procedure failed on otherwise valid input."""


class DivergenceError(NumericsError):
    """Integration or prediction produced a non-finite state."""

    def __init__(self, message: str, step: int | None = None):
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)
        self.step = step


class SamplingError(NumericsError):
    """Rejection sampling exhausted its retry budget."""


class NoPrincipalLogError(NumericsError):
    """Matrix has an eigenvalue on the closed negative real axis."""


class IllConditionedError(NumericsError):
    """Eigenvector basis too ill-conditioned for a trustworthy result."""
