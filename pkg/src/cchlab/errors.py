"""Exception types shared across the package.

The CLI maps these onto process exit codes: configuration problems exit 1,
blow-up exits 2, and invalid-measurement conditions (domain too small,
trajectory too short) exit 3.
"""

from __future__ import annotations


class ConfigurationError(ValueError):
    """Invalid parameter, config key, grid specification, or initial condition."""


class StabilityError(ConfigurationError):
    """Requested time step violates the advective stability bound."""


class BlowUpError(RuntimeError):
    """Field magnitudes exceeded the blow-up threshold.

    Carries the last valid state (``state``) and, when raised from a full
    run, the partial trajectory of snapshots completed so far
    (``trajectory``, may be None for a single step).
    """

    def __init__(self, message: str, state=None, trajectory=None):
        super().__init__(message)
        self.state = state
        self.trajectory = trajectory


class DomainTooSmallError(RuntimeError):
    """The periodic window is too small for a valid measurement.

    Raised when window-edge contamination would corrupt exponentially
    weighted integrals, or when a tracked position leaves the window.
    """


class MeasurementError(RuntimeError):
    """A requested measurement cannot be extracted from the available data."""
