"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A physical or statistical parameter is out of its admissible range."""


class ConfigError(ValueError):
    """A scenario/config file is malformed or internally inconsistent."""


class NotPositiveDefiniteError(ParameterError):
    """A correlation matrix failed its positive-definiteness check."""

    def __init__(self, message, order=None):
        super().__init__(message)
        self.order = order  # size of the offending leading minor, if known


class InclusionExclusionCapError(RuntimeError):
    """Exact alarm-pattern enumeration was refused because it would need
    more than 2**cap box integrals; use the closed-form approximation
    instead."""
