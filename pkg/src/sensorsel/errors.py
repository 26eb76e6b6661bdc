"""Exception hierarchy.

Validation problems (bad input, bad arguments) derive from ``ValueError``;
numerical failures derive from ``ArithmeticError``. The CLI maps the first
family to exit code 1 and the second to exit code 2.
"""


class SensorSelError(Exception):
    """Base class for all package errors."""


class ValidationError(SensorSelError, ValueError):
    pass


class ParseError(ValidationError):
    """A file could not be parsed under its declared format."""


class NumericalError(SensorSelError, ArithmeticError):
    pass


class RankDeficiencyError(NumericalError):
    """A greedy pivot fell below the rank-deficiency threshold.

    Attributes
    ----------
    step : int
        1-based selection step at which the pivot collapsed.
    value : float
        The offending pivot value.
    """

    def __init__(self, step, value, msg=None):
        self.step = step
        self.value = value
        super().__init__(msg or f"rank deficiency at step {step}: pivot value {value:.3e}")


class IllConditionedError(NumericalError):
    pass
