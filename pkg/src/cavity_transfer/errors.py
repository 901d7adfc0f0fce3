"""Exception types raised across the package."""


class TruncationError(ValueError):
    """A Fock-space truncation is too small for the requested operation."""


class CalibrationRangeError(ValueError):
    """A pump amplitude lies outside the calibrated range."""


class FitError(ValueError):
    """A least-squares fit could not be performed (e.g. rank-deficient data)."""


class InfeasiblePulseError(RuntimeError):
    """A requested wavepacket cannot be produced within the pump limits.

    ``time`` holds the first grid time (s) at which the limit is exceeded.
    """

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class IntegrationError(RuntimeError):
    """Time integration failed (grid mismatch, instability, non-finite values)."""


class ReconstructionError(RuntimeError):
    """State or process reconstruction failed."""


class ConfigError(ValueError):
    """Scenario configuration is invalid.  ``path`` names the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
