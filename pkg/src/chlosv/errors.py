"""Exception types shared across the package."""


class ChlosvError(Exception):
    """Base class for all package-specific errors."""


class InvalidInputError(ChlosvError, ValueError):
    """Raised when an observation or parameter contains NaN/Inf or violates
    a hard precondition (as opposed to merely lying outside a density's
    support, which yields -inf)."""


class InvalidParameterError(ChlosvError, ValueError):
    """Raised for structurally invalid model parameters (phi >= 1, sigma <= 0,
    discount factor outside (0.5, 1), ...)."""


class DataError(ChlosvError, ValueError):
    """Raised by the CSV layer for malformed or inconsistent bar data.

    Carries the 1-based file row number when one is known.
    """

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class ConfigError(ChlosvError, ValueError):
    """Raised for unusable run configuration (file or flags)."""


class FilterDegeneracyError(ChlosvError, RuntimeError):
    """Raised when every particle receives zero likelihood in a period.

    ``period`` is the 0-based index of the offending bar.
    """

    def __init__(self, period: int, detail: str = ""):
        self.period = period
        msg = f"particle filter degenerated at period {period}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
