"""Vertically polarised antennas."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DIPOLE_PEAK_GAIN = 1.643
_Z = np.array([0.0, 0.0, 1.0])


def dipole_gain(theta):
    """Half-wave dipole power gain at angle ``theta`` from the dipole axis."""
    theta = np.asarray(theta, dtype=float)
    s = np.sin(theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = DIPOLE_PEAK_GAIN * (np.cos(0.5 * math.pi * np.cos(theta)) / s) ** 2
    g = np.where(np.abs(s) < 1e-12, 0.0, g)
    return g if g.ndim else float(g)


def theta_hat(direction: np.ndarray) -> np.ndarray:
    """Unit polar vector of a z-directed dipole for an outgoing ``direction``.

    On the axis the polar vector is undefined; x is returned there.
    """
    d = direction / np.linalg.norm(direction)
    v = d[2] * d - _Z
    nv = np.linalg.norm(v)
    if nv < 1e-12:
        return np.array([1.0, 0.0, 0.0])
    return v / nv


@dataclass(frozen=True)
class Antenna:
    """Vertically polarised antenna with a ``"dipole"`` or ``"isotropic"`` pattern."""

    pattern: str = "dipole"

    def __post_init__(self):
        if self.pattern not in ("dipole", "isotropic"):
            raise ValueError(f"unknown antenna pattern {self.pattern!r}")

    def gain(self, direction: np.ndarray) -> float:
        if self.pattern == "isotropic":
            return 1.0
        d = direction / np.linalg.norm(direction)
        return float(dipole_gain(math.acos(max(-1.0, min(1.0, d[2])))))

    def polarization(self, direction: np.ndarray) -> np.ndarray:
        return theta_hat(direction)


DIPOLE = Antenna("dipole")
ISOTROPIC = Antenna("isotropic")
