"""Sphere RCS across the Rayleigh, resonance and optical regions."""

from __future__ import annotations

import enum
import math

import numpy as np

RAYLEIGH_LIMIT = 0.5  # ka below this is Rayleigh
OPTICAL_LIMIT = 10.0  # ka at or above this is optical

# resonance surrogate: 1 + A exp(-D (ka - 1)) cos(pi (ka - 1) / P)
_RES_AMPLITUDE = 2.65
_RES_DECAY = 0.55
_RES_PERIOD = 1.3
# width (in ka) of the exponential patches that pin the surrogate to the
# neighbouring regions; narrow enough to leave the ka ~ 1 peak untouched
_BLEND_WIDTH = 0.12


class ScatteringRegion(enum.Enum):
    RAYLEIGH = "Rayleigh"
    RESONANCE = "Resonance"
    OPTICAL = "Optical"


def _check(size: float, wavelength: float) -> float:
    if not (size > 0 and wavelength > 0):
        raise ValueError("size and wavelength must be positive")
    return 2 * math.pi * size / wavelength


def scattering_region(characteristic_size: float, wavelength: float) -> ScatteringRegion:
    ka = _check(characteristic_size, wavelength)
    if ka < RAYLEIGH_LIMIT:
        return ScatteringRegion.RAYLEIGH
    if ka < OPTICAL_LIMIT:
        return ScatteringRegion.RESONANCE
    return ScatteringRegion.OPTICAL


def _surrogate(ka):
    x = ka - 1.0
    return 1.0 + _RES_AMPLITUDE * np.exp(-_RES_DECAY * x) * np.cos(np.pi * x / _RES_PERIOD)


def normalized_sphere_rcs(ka):
    """sigma / (pi a^2) as a function of electrical size ``ka`` (vectorised)."""
    ka = np.asarray(ka, dtype=float)
    out = np.ones_like(ka)
    ray = ka < RAYLEIGH_LIMIT
    out[ray] = 9.0 * ka[ray] ** 4
    res = (ka >= RAYLEIGH_LIMIT) & (ka < OPTICAL_LIMIT)
    k = ka[res]
    left = 9.0 * RAYLEIGH_LIMIT**4 - _surrogate(RAYLEIGH_LIMIT)
    right = 1.0 - _surrogate(OPTICAL_LIMIT)
    out[res] = (
        _surrogate(k)
        + left * np.exp(-(k - RAYLEIGH_LIMIT) / _BLEND_WIDTH)
        + right * np.exp(-(OPTICAL_LIMIT - k) / _BLEND_WIDTH)
    )
    return out if out.ndim else float(out)


def sphere_rcs(radius: float, wavelength: float) -> float:
    """Monostatic RCS (m^2) of a conducting sphere, piecewise model."""
    ka = _check(radius, wavelength)
    return float(normalized_sphere_rcs(ka)) * math.pi * radius**2


def ka_sweep(ka_values) -> list[tuple[float, float]]:
    """Rows of (ka, sigma / pi a^2) for the ``size ka-sweep`` report."""
    ka_values = np.asarray(ka_values, dtype=float)
    return list(zip(ka_values.tolist(), np.atleast_1d(normalized_sphere_rcs(ka_values)).tolist()))
