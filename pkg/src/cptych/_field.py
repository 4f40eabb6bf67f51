"""Plane-to-plane linear operators on complex grids.

Conventions
-----------
* Transforms are unitary (``norm="ortho"``) in both directions, so every
  Fourier multiplier with unit modulus is unitary and its adjoint is its
  inverse.
* Frequencies follow FFT ordering: DC at index 0, then positive, then
  negative frequencies (``numpy.fft.fftfreq``).
* Boundaries are circular. Scan ranges must keep content away from the
  wrap-around.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft

from cptych._config import OpticalGeometry, thread_count
from cptych._types import ComplexField, DimensionError, RealGrid, ScanPosition


@dataclass(frozen=True)
class FrequencyGrid:
    """Spatial frequencies (cycles/meter) in FFT ordering."""

    fx: np.ndarray
    fy: np.ndarray


@lru_cache(maxsize=64)
def frequency_grid(shape: tuple[int, int], pitch: float) -> FrequencyGrid:
    fy = np.fft.fftfreq(shape[0], d=pitch)
    fx = np.fft.fftfreq(shape[1], d=pitch)
    fx.flags.writeable = False
    fy.flags.writeable = False
    return FrequencyGrid(fx=fx, fy=fy)


def fft2(f: ComplexField) -> ComplexField:
    return scipy.fft.fft2(f, norm="ortho", workers=thread_count())  # type: ignore[no-any-return]


def ifft2(f: ComplexField) -> ComplexField:
    return scipy.fft.ifft2(f, norm="ortho", workers=thread_count())  # type: ignore[no-any-return]


@lru_cache(maxsize=64)
def _transfer(
    shape: tuple[int, int], pitch: float, wavelength: float, distance: float
) -> ComplexField:
    freqs = frequency_grid(shape, pitch)
    arg = 1.0 / wavelength**2 - freqs.fy[:, None] ** 2 - freqs.fx[None, :] ** 2
    propagating = arg >= 0.0
    kz = np.sqrt(np.where(propagating, arg, 0.0))
    h = np.where(propagating, np.exp(2j * np.pi * distance * kz), 0.0)
    h.flags.writeable = False
    return h


def propagation_band(shape: tuple[int, int], geom: OpticalGeometry) -> np.ndarray:
    """Boolean mask of propagating (non-evanescent) spectral components."""
    return np.abs(_transfer(shape, geom.pitch, geom.wavelength, 0.0)) > 0.0


@lru_cache(maxsize=64)
def _full_band(shape: tuple[int, int], pitch: float, wavelength: float) -> bool:
    # The zero-distance transfer is the band indicator.
    return bool(np.all(_transfer(shape, pitch, wavelength, 0.0) != 0.0))


def propagate(f: ComplexField, distance: float, geom: OpticalGeometry) -> ComplexField:
    """Band-limited angular-spectrum propagation over *distance* meters.

    Evanescent components are set to zero; negative distances back-propagate.
    """
    if not math.isfinite(distance):
        raise ValueError(f"Propagation distance must be finite, got {distance}")
    if distance == 0.0 and _full_band(f.shape, geom.pitch, geom.wavelength):
        return f.copy()
    h = _transfer(f.shape, geom.pitch, geom.wavelength, float(distance))
    return ifft2(h * fft2(f))


@lru_cache(maxsize=256)
def _phase_ramp(
    shape: tuple[int, int], pitch: float, dx: float, dy: float
) -> ComplexField:
    freqs = frequency_grid(shape, pitch)
    ramp = np.exp(2j * np.pi * (freqs.fy[:, None] * dy + freqs.fx[None, :] * dx))
    ramp.flags.writeable = False
    return ramp


def shift(f: ComplexField, pos: ScanPosition, geom: OpticalGeometry) -> ComplexField:
    """Circular subpixel translation by a Fourier phase ramp."""
    if pos.dx == 0.0 and pos.dy == 0.0:
        return f.copy()
    ramp = _phase_ramp(f.shape, geom.pitch, pos.dx, pos.dy)
    return ifft2(ramp * fft2(f))


def _check_divisible(shape: tuple[int, ...], r: int) -> None:
    if r < 1:
        raise ValueError(f"Binning ratio must be >= 1, got {r}")
    if shape[0] % r or shape[1] % r:
        raise DimensionError(f"Grid shape {shape} is not divisible by binning ratio {r}")


def bin_intensity(intensity: RealGrid, r: int) -> RealGrid:
    """Sum each non-overlapping r x r block into one sensor pixel."""
    _check_divisible(intensity.shape, r)
    if r == 1:
        return np.array(intensity, dtype=np.float64)
    n1, n2 = intensity.shape
    blocks = intensity.reshape(n1 // r, r, n2 // r, r)
    return blocks.sum(axis=(1, 3))  # type: ignore[no-any-return]


def upsample_adjoint(s: RealGrid, r: int) -> RealGrid:
    """Replicate each sensor value into its r x r block (transpose of binning)."""
    if r < 1:
        raise ValueError(f"Binning ratio must be >= 1, got {r}")
    if r == 1:
        return np.array(s, dtype=np.float64)
    return np.repeat(np.repeat(s, r, axis=0), r, axis=1)
