"""Exception types shared across the package."""


class GradflowError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(GradflowError):
    """Malformed run configuration (unknown key, bad value, missing preset)."""


class SingularOperatorError(GradflowError):
    """A per-mode linear solve hit a non-invertible mode."""


class NoRootFoundError(GradflowError):
    """The scalar multiplier equation has no root in the search bracket.

    Usually means the time step is too large for a correction to exist;
    reducing dt is the standard remedy.
    """

    def __init__(self, message, best_eta=None, best_residual=None):
        super().__init__(message)
        self.best_eta = best_eta
        self.best_residual = best_residual


class EmptyFeasibleSetError(GradflowError):
    """No multiplier value can make the step energy non-increasing."""


class StepAbortError(GradflowError):
    """A time step could not be completed.

    Carries enough context to reproduce the failure; there is deliberately
    no silent fallback to the uncorrected step.
    """

    def __init__(self, step_index, branch, message, details=None):
        super().__init__(f"step {step_index} aborted ({branch}): {message}")
        self.step_index = step_index
        self.branch = branch
        self.details = details or {}
