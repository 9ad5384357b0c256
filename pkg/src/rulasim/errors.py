"""Exception taxonomy shared across the simulator.

The CLI maps these onto exit codes: configuration errors exit 1,
numerical failures exit 2, I/O problems exit 3.
"""


class ConfigurationError(ValueError):
    """Invalid parameters, flags, or config-file contents."""


class GeometryError(ValueError):
    """Degenerate geometry, e.g. a device coincident with the AP."""


class CombiningError(RuntimeError):
    """Combiner could not be formed (singular or ill-conditioned Gram)."""


class NumericalError(RuntimeError):
    """Numerical failure: factorization breakdown or excess combining failures."""


class OptimizationError(NumericalError):
    """Rotation search failed at every grid point."""
