from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np
import numpy.typing as npt

ComplexField = npt.NDArray[np.complex128]
"""A 2-D complex128 grid, row-major. Wavefields, objects and surfaces."""

RealGrid = npt.NDArray[np.float64]
"""A 2-D float64 grid. Intensities and sensor frames."""


class CptychError(Exception):
    """Base class for errors raised by cptych."""


class DimensionError(CptychError, ValueError):
    """Array shapes are inconsistent with each other or with the geometry."""


class ConfigError(CptychError, ValueError):
    """A configuration file or value is invalid."""


class ContainerFormatError(CptychError, ValueError):
    """A container file is malformed, truncated or of an unknown version."""


class DivergenceError(CptychError, RuntimeError):
    """A reconstruction produced non-finite values."""

    def __init__(self, message: str, *, last_good_iteration: int) -> None:
        super().__init__(message)
        self.last_good_iteration = last_good_iteration


@dataclass(frozen=True)
class ScanPosition:
    """Lateral translation (meters) of the k-th measurement."""

    dx: float
    dy: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.dx) and math.isfinite(self.dy)):
            raise ValueError(f"Scan position must be finite, got ({self.dx}, {self.dy})")

    def __neg__(self) -> ScanPosition:
        return ScanPosition(-self.dx, -self.dy)


def as_field(data: Any, *, name: str = "field") -> ComplexField:
    """Coerce *data* to a finite 2-D complex128 array."""
    arr = np.asarray(data, dtype=np.complex128)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise DimensionError(f"{name} must not be empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def as_real_grid(data: Any, *, name: str = "grid") -> RealGrid:
    """Coerce *data* to a finite 2-D float64 array."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_same_shape(a: npt.NDArray[Any], b: npt.NDArray[Any], what: str) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{what}: shape mismatch {a.shape} vs {b.shape}")
