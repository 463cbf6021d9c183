"""Exception and warning types shared across the package."""


class DataError(ValueError):
    """Input does not satisfy the data schema or an operation's preconditions."""


class NumericError(ArithmeticError):
    """A computation produced a non-finite value where a finite one is required."""


class DegenerateWarning(RuntimeWarning):
    """A degenerate input was resolved by a documented fallback."""
