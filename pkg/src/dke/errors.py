"""Exception and warning types shared across the package."""


class DKEError(Exception):
    """Base class for all package errors."""


class MetricError(DKEError, ValueError):
    """A distance matrix or measure failed validation.

    ``violations`` holds the full report from :func:`dke.mmspace.validate_metric`.
    """

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class HypothesisViolation(DKEError, ValueError):
    """The inputs do not satisfy the hypotheses of a bound or theorem."""

    def __init__(self, message, reference=""):
        if reference:
            message = f"{message} [{reference}]"
        super().__init__(message)
        self.reference = reference


class NumericFailure(DKEError, ArithmeticError):
    """An eigensolver or other numerical kernel failed."""


class MultiplicityWarning(UserWarning):
    """Eigenvalues are (nearly) repeated, so eigenvectors are not canonical."""
