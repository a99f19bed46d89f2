"""
Exception hierarchy for the weak-measurement simulator.

Every error carries a short machine-readable code and the process exit code
the command-line front end uses when the error escapes a subcommand.
"""

from typing import Optional


class WeakProbeError(Exception):
    """Base class for all simulator errors."""

    code = "error"
    exit_code = 1

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    @property
    def reason(self) -> str:
        """Single-line reason suitable for a CLI diagnostic."""
        return " ".join(str(self.message).split())


class DimensionMismatchError(WeakProbeError, ValueError):
    code = "dimension-mismatch"


class InvalidStateError(WeakProbeError, ValueError):
    code = "invalid-state"


class InvalidObservableError(WeakProbeError, ValueError):
    code = "invalid-observable"


class InvalidChannelError(WeakProbeError, ValueError):
    code = "invalid-channel"


class DegenerateSelectionError(WeakProbeError):
    """Raised when a post-selected state has (numerically) zero trace."""

    code = "degenerate-post-selection"
    exit_code = 2

    def __init__(self, message: str, trace: Optional[float] = None):
        super().__init__(message)
        self.trace = trace


class OrthogonalSelectionError(WeakProbeError):
    """Pre- and post-selection are (numerically) orthogonal."""

    code = "orthogonal-selection"
    exit_code = 2

    def __init__(self, overlap: float, floor: float):
        super().__init__(
            f"orthogonal selection, overlap {overlap:.6e} is below the floor {floor:.1e}"
        )
        self.overlap = overlap
        self.floor = floor


class InsufficientStatisticsError(WeakProbeError):
    code = "insufficient-statistics"
    exit_code = 3

    def __init__(self, message: str, accepted: int = 0):
        super().__init__(message)
        self.accepted = accepted


class FitError(WeakProbeError, ValueError):
    code = "singular-fit"


class ConfigError(WeakProbeError, ValueError):
    code = "config"


class PropertyFailure(WeakProbeError):
    code = "property-failure"
    exit_code = 4

    def __init__(self, failed: list):
        names = ",".join(failed)
        super().__init__(f"{len(failed)} properties failed: {names}")
        self.failed = list(failed)
