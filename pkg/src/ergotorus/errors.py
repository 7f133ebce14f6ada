"""Exception types shared across the package."""


class ErgotorusError(Exception):
    """Base class for package errors."""


class ValidationError(ErgotorusError):
    """Bad input. `key` names the offending field or config key."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class DimensionMismatchError(ValidationError):
    def __init__(self, key: str, expected: int, got: int):
        super().__init__(key, f"expected dimension {expected}, got {got}")
        self.expected = expected
        self.got = got


class DegenerateVarianceError(ErgotorusError):
    """Asymptotic normalization is undefined because sigma^2 <= 0.

    Vanishing variance means the centered sums stay bounded; the right
    diagnostic is `degeneracy.bounded_sum_verify`, named here so callers are
    pointed at it instead of dividing by zero.
    """

    def __init__(self, sigma2: float):
        self.sigma2 = sigma2
        self.suggestion = "degeneracy.bounded_sum_verify"
        super().__init__(
            f"sigma2 = {sigma2} is not positive; the normalized statistic is "
            f"undefined. Run {self.suggestion} to confirm bounded sums instead."
        )


class BudgetExceededError(ErgotorusError):
    """An exact enumeration would overflow its budget.

    `required` reports the atom/state count the call would need, so the
    caller can either raise the budget or switch to sampling.
    """

    def __init__(self, required: int, budget: int, what: str = "atoms"):
        self.required = required
        self.budget = budget
        self.what = what
        super().__init__(
            f"exact enumeration needs {required} {what}, budget is {budget}"
        )
