"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid model, policy or run configuration."""


class NumericalError(ArithmeticError):
    """A numerical routine could not deliver a trustworthy value."""


class SimulationFault(RuntimeError):
    """The simulator produced a non-finite or otherwise impossible state."""


class UnsupportedDimensionError(ValueError):
    """Requested computation is not available for this number of components."""
