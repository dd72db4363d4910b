"""Exception types shared across the solver."""


class RetrialQError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(RetrialQError):
    """A model configuration violates its invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations)
        super().__init__(f"invalid configuration: {lines}")


class UnstableError(RetrialQError):
    """The ergodicity condition rho < 1 fails; the solver refuses to run."""

    def __init__(self, rho):
        self.rho = rho
        super().__init__(f"system is not stable (rho = {rho:.6g} >= 1)")


class ConvergenceError(RetrialQError):
    """An iterative step failed to reach its tolerance within its budget."""

    def __init__(self, what, residual, iterations):
        self.what = what
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"{what} did not converge: residual {residual:.3e} "
            f"after {iterations} iterations"
        )


class BudgetExhaustedError(RetrialQError):
    """A search exhausted its configured budget without an answer."""
