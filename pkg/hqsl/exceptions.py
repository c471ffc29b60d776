class HqslError(Exception):
    """Base class for every error raised by hqsl."""


class ConfigError(HqslError, ValueError):
    """Missing, contradictory or out-of-range run configuration."""


class PropagationError(HqslError, ArithmeticError):
    """The amplitude equations could not be propagated reliably."""


class NonConvergenceError(PropagationError):
    """The fallback integrator could not meet its tolerance."""


class NormGrowthError(PropagationError):
    """An amplitude grew beyond 1, which a lossy generator cannot do."""


class DegenerateEvolutionError(HqslError, ValueError):
    """The QSL ratio is undefined because the qubit did not evolve."""


class DefectiveGeneratorError(PropagationError):
    """The generator's eigenvectors are too ill-conditioned to diagonalise it."""
