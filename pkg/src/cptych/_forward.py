from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from cptych._config import NoiseSpec, OpticalGeometry, PoissonNoise
from cptych._field import bin_intensity, propagate, shift
from cptych._types import (
    ComplexField,
    DimensionError,
    RealGrid,
    ScanPosition,
    as_field,
    as_real_grid,
    check_same_shape,
)

logger = logging.getLogger(__name__)

_MODULUS_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class CodedSurface:
    """Complex transmittance of a passive coded layer (modulus <= 1)."""

    transmittance: ComplexField

    def __post_init__(self) -> None:
        t = as_field(self.transmittance, name="coded surface")
        if np.max(np.abs(t)) > 1.0 + _MODULUS_TOL:
            raise ValueError(
                f"Coded surface modulus must not exceed 1, got {np.max(np.abs(t))}"
            )
        object.__setattr__(self, "transmittance", t)

    @property
    def shape(self) -> tuple[int, int]:
        return self.transmittance.shape  # type: ignore[return-value]

    @classmethod
    def clamped(cls, transmittance: ComplexField) -> CodedSurface:
        """Project onto the unit-modulus disk, keeping phases."""
        t = np.asarray(transmittance, dtype=np.complex128)
        mod = np.abs(t)
        scale = np.where(mod > 1.0, 1.0 / np.where(mod > 1.0, mod, 1.0), 1.0)
        return cls(t * scale)


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """K scan positions with their recorded sensor frames."""

    positions: tuple[ScanPosition, ...]
    frames: tuple[RealGrid, ...]
    geom: OpticalGeometry
    _stack: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        positions = tuple(self.positions)
        frames = tuple(as_real_grid(f, name=f"frame {k}") for k, f in enumerate(self.frames))
        if not positions:
            raise ValueError("positions must not be empty")
        if len(positions) != len(frames):
            raise DimensionError(
                f"{len(positions)} positions but {len(frames)} frames"
            )
        shape = frames[0].shape
        for k, frame in enumerate(frames):
            if frame.shape != shape:
                raise DimensionError(
                    f"frame {k} has shape {frame.shape}, expected {shape}"
                )
            if np.any(frame < 0.0):
                raise ValueError(f"frame {k} contains negative intensities")
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "_stack", np.stack(frames))

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def sensor_shape(self) -> tuple[int, int]:
        return self.frames[0].shape  # type: ignore[return-value]

    @property
    def object_shape(self) -> tuple[int, int]:
        n1, n2 = self.sensor_shape
        r = self.geom.sr_ratio
        return n1 * r, n2 * r

    @property
    def mean_frame_energy(self) -> float:
        return float(self._stack.sum(axis=(1, 2)).mean())


def exit_wave(
    obj: ComplexField, cs: CodedSurface, pos: ScanPosition, geom: OpticalGeometry
) -> ComplexField:
    """Field just behind the coded surface: shift(P_d1 O) * phi."""
    check_same_shape(obj, cs.transmittance, "exit_wave")
    return shift(propagate(obj, geom.d1, geom), pos, geom) * cs.transmittance


def sensor_field(
    obj: ComplexField, cs: CodedSurface, pos: ScanPosition, geom: OpticalGeometry
) -> ComplexField:
    """Full-resolution complex field at the sensor plane."""
    return propagate(exit_wave(obj, cs, pos, geom), geom.d2, geom)


def forward_intensity(
    obj: ComplexField, cs: CodedSurface, pos: ScanPosition, geom: OpticalGeometry
) -> RealGrid:
    """Binned sensor intensity for one scan position (no dark offset)."""
    psi_s = sensor_field(obj, cs, pos, geom)
    return bin_intensity(np.abs(psi_s) ** 2, geom.sr_ratio)


def simulate_dataset(
    obj: ComplexField,
    cs: CodedSurface,
    positions: Sequence[ScanPosition],
    geom: OpticalGeometry,
    noise: NoiseSpec | None = None,
) -> MeasurementSet:
    """Synthesize one frame per scan position, optionally with shot noise."""
    if not positions:
        raise ValueError("positions must not be empty")
    obj = as_field(obj, name="object")
    frames = [forward_intensity(obj, cs, pos, geom) for pos in positions]
    if isinstance(noise, PoissonNoise):
        rng = np.random.Generator(np.random.Philox(noise.seed))
        scale = noise.photon_scale
        frames = [rng.poisson(frame * scale).astype(np.float64) / scale for frame in frames]
        logger.debug(
            "Applied Poisson noise at %.3g photons per unit intensity", scale
        )
    logger.info(
        "Simulated %d frames of shape %s", len(frames), frames[0].shape
    )
    return MeasurementSet(positions=tuple(positions), frames=tuple(frames), geom=geom)
