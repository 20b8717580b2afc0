"""Exception types raised across the package."""


class QDiscernError(Exception):
    """Base class for all package errors."""


class DimensionError(QDiscernError, ValueError):
    pass


class HermiticityError(QDiscernError, ValueError):
    pass


class NormalizationError(QDiscernError, ValueError):
    """A state or POVM fails its normalization invariant."""


class PositivityError(QDiscernError, ValueError):
    pass


class StationaryStateError(QDiscernError, ValueError):
    """The state does not move under the Hamiltonian (zero energy variance)."""


class EnumerationTooLarge(QDiscernError, ValueError):
    """Exact count-vector enumeration exceeds the configured cap.

    Use :func:`qdiscern.hypothesis_testing.monte_carlo_power` instead.
    """


class ConfigError(QDiscernError, ValueError):
    pass
