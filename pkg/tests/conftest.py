"""Shared helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from cchlab.grid import make_grid


def bump_values(x: np.ndarray, center: float, width: float, amplitude: float) -> np.ndarray:
    """Compactly supported C-infinity bump: amplitude * exp(-1/(1-s^2)) for
    s = (x-center)/width inside |s| < 1, identically zero outside."""
    out = np.zeros_like(x, dtype=np.float64)
    s = (x - center) / width
    inside = np.abs(s) < 1.0
    out[inside] = amplitude * np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


@pytest.fixture(scope="session")
def grid_standard():
    """The default production grid: the window [-30, 30) at 2048 nodes."""
    return make_grid(30.0, 2048)
