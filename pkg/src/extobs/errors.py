"""Exception types shared across the package."""


class ConfigError(Exception):
    """A configuration violates a structural precondition (dimensions,
    stability, observability, spectrum separation)."""


class DivergenceError(RuntimeError):
    """A simulated state left the finite / bounded region.

    Carries the time stamp and a short description of the offending state.
    """

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t
