"""Exception hierarchy.

All errors derive from RuntimeError so callers that only catch RuntimeError
keep working; the CLI maps the subclasses to exit codes.
"""

from __future__ import annotations


class FactorCopulaError(RuntimeError):
    """Base class for all package errors."""


class ConfigError(FactorCopulaError):
    """Invalid configuration, candidate file, preset or CLI argument."""


class DataError(FactorCopulaError):
    """Input data that cannot be modelled (parse failure, bad support)."""


class DegenerateMarginError(DataError):
    """A column without variation."""


class ParameterDomainError(FactorCopulaError, ValueError):
    """Copula or margin parameters outside their domain."""


class TauRangeError(FactorCopulaError, ValueError):
    """Kendall tau not attainable by the requested family and variant."""


class NumericalError(FactorCopulaError):
    """A numerical routine failed."""


class ConvergenceError(NumericalError):
    """An iterative solver did not converge."""


class DegenerateLoadingError(NumericalError):
    """Loadings on the boundary of the correlation domain."""
