"""Exception hierarchy.

Every error carries the process exit code the CLI reports for it:
2 configuration/parameter problems, 3 numerical failure, 4 size cap exceeded.
"""


class IonSBMError(Exception):
    exit_code = 3


class ParameterError(IonSBMError, ValueError):
    """Invalid physical parameters (violated type invariants)."""

    exit_code = 2


class ConfigError(IonSBMError):
    exit_code = 2

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class RegimeError(ConfigError):
    """A regime-validity rule failed under strict checking."""


class CapExceededError(IonSBMError):
    exit_code = 4

    def __init__(self, dim, cap, what="Hilbert space"):
        self.dim = dim
        self.cap = cap
        super().__init__(f"{what} dimension {dim} exceeds the configured cap {cap}")


class PropagationError(IonSBMError):
    def __init__(self, step, reason):
        self.step = step
        super().__init__(f"propagation failed at step {step}: {reason}")


class QuadratureError(IonSBMError):
    def __init__(self, value, estimate, message="quadrature did not converge"):
        self.value = value
        self.estimate = estimate
        super().__init__(f"{message} (value={value!r}, error estimate={estimate!r})")


class FitError(IonSBMError):
    """Raised when no restart converged; keeps the best parameters seen."""

    def __init__(self, message, best=None, residual=None):
        self.best = best
        self.residual = residual
        super().__init__(message)


class ChainMapError(IonSBMError):
    def __init__(self, index, message="loss of orthogonality"):
        self.index = index
        super().__init__(f"{message} at recurrence index {index}")


class IllConditionedMapError(IonSBMError):
    def __init__(self, index, cond):
        self.index = index
        self.cond = cond
        super().__init__(
            f"dynamical map at time index {index} is ill-conditioned (cond={cond:.3e})"
        )
