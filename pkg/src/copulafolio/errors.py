"""Exception hierarchy shared across the package."""


class CopulafolioError(Exception):
    """Base class for all package errors."""


class DataError(CopulafolioError):
    """Malformed or inconsistent market data / configuration files."""


class ParameterError(CopulafolioError, ValueError):
    """Parameter outside its admissible domain."""


class FitError(CopulafolioError):
    """Copula fitting failed (non-convergence, degenerate input)."""


class IntegrationError(CopulafolioError):
    """Non-finite value produced while evaluating an expectation."""


class OptimizationError(CopulafolioError):
    """Constrained minimization failed (infeasible constraint, line search)."""


class NoDownsideError(CopulafolioError):
    """UPR denominator is zero: no observation falls below the target."""
