"""Exception types raised across the package.

Validation problems derive from :class:`ValidationError` (CLI exit code 2);
exhausted search budgets and non-converging series derive from
:class:`BudgetError` (CLI exit code 3).
"""


class ValidationError(ValueError):
    pass


class EmptyClass(ValidationError):
    """mu_inf is smaller than the largest background intensity."""


class BadIntensity(ValidationError):
    pass


class BadSparsity(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class IndexOutOfRange(ValidationError):
    pass


class AllZero(ValidationError):
    """Every observed entry is zero, so the sigma^2 grid cannot be identified."""


class EmptySample(ValidationError):
    pass


class NonPositiveRate(ValidationError):
    pass


class BadEps(ValidationError):
    pass


class GridTooLarge(ValidationError):
    pass


class BudgetError(RuntimeError):
    pass


class NoConvergence(BudgetError):
    pass


class PackingBudgetExceeded(BudgetError):
    def __init__(self, message, achieved):
        super().__init__(message)
        self.achieved = achieved
