"""Exception hierarchy shared by all modules."""


class QuantMatchError(Exception):
    """Base class for every error raised by quantmatch."""


class DomainError(QuantMatchError, ValueError):
    """An argument lies outside the domain of a function (e.g. p not in (0, 1))."""


class PreconditionError(QuantMatchError, ValueError):
    """An input violates a documented precondition."""


class ConvergenceError(QuantMatchError, RuntimeError):
    """An iterative numerical routine failed to converge."""


class NumericError(QuantMatchError, ArithmeticError):
    """A numerical routine (factorization, quadrature) failed."""


class InitializationError(QuantMatchError, RuntimeError):
    """MCMC could not find a starting point with finite log posterior."""


class FormatError(QuantMatchError, ValueError):
    """A file or text block does not follow the expected format."""


class UnusableForecastError(QuantMatchError, ValueError):
    """A hub forecast has too few usable quantiles to be fitted."""


class StudyError(QuantMatchError, RuntimeError):
    """Too many replicates of a simulation study failed."""
