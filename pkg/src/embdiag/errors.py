"""Exception types shared across the package."""


class EmbDiagError(Exception):
    """Base class for all package errors."""


class DomainError(EmbDiagError):
    """A point lies outside the domain, or a domain is malformed."""


class AssumptionViolation(EmbDiagError):
    """A standing assumption on the weight failed at a sampled point.

    Carries the offending point and value so mis-declared zero/infinity
    sets are easy to track down.
    """

    def __init__(self, message, point=None, value=None):
        super().__init__(message)
        self.point = point
        self.value = value


class ExpressionError(EmbDiagError):
    """A weight/profile expression failed to parse or used a forbidden node."""


class BudgetExceededError(EmbDiagError):
    """Quadrature could not reach the requested tolerance within budget.

    ``best`` holds the best available estimate (a MeasureResult with
    converged=False) so callers can degrade gracefully.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class UnsupportedRegionError(EmbDiagError):
    """Requested region/domain combination has no integration strategy."""


class PresetInapplicableError(EmbDiagError):
    """A flow-certificate preset rejected its hypotheses.

    ``failed_hypothesis`` names the first hypothesis that failed.
    """

    def __init__(self, message, failed_hypothesis=None):
        super().__init__(message)
        self.failed_hypothesis = failed_hypothesis


class UndefinedFiberError(EmbDiagError):
    """Fiber average requested at a point where the weight vanishes."""


class SolverError(EmbDiagError):
    """Eigen-solver failed to converge; carries a residual report."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class ConfigError(EmbDiagError):
    """Configuration file is invalid; ``field`` names the offending entry."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
