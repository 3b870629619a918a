"""Exception types shared across the package."""


class BudgetExceeded(RuntimeError):
    """An exact method would need more states than the caller allowed."""

    def __init__(self, required: int, budget: int, what: str = "factor pairs"):
        self.required = required
        self.budget = budget
        self.what = what
        super().__init__(f"{what}: need {required}, budget is {budget}")


class PreconditionFailed(ValueError):
    """A bound was requested outside the range where its derivation applies."""


class NoCrossing(ValueError):
    """An error-rate curve never reaches the requested target."""
