"""Exception types shared across the package."""


class ConfigurationError(Exception):
    """Inconsistent grids, malformed configs, ill-ordered bounds, bad files."""


class ContractViolationError(Exception):
    """An operation received input that violates its preconditions."""


class BlowUpError(RuntimeError):
    """Time integration produced NaN/Inf or runaway amplitude.

    Carries the index of the step at which the guard tripped.
    """

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"solution blew up at step {step}")
