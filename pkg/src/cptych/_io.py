"""Binary containers and PGM images.

Dataset container, version 1 (all little-endian)::

    header  <6s H H I I I I d d d d q 32s>
            magic b"CPTYDS", version, flags, K, N1, N2, r,
            wavelength, pitch, d1, d2, seed, SHA-256 of the run config
    block   positions   K x 2        float64   (dx, dy) in meters
    block   frames      K x N1/r x N2/r float64
    block   object      N1 x N2      complex128 (re, im interleaved)  if flags & 1
    block   surface     N1 x N2      complex128                       if flags & 2

Array file, version 1::

    header  <6s H I I>   magic b"CPTYAR", version, rows, cols
    block   data         rows x cols complex128
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from pydantic import ValidationError

from cptych._config import OpticalGeometry
from cptych._forward import CodedSurface, MeasurementSet
from cptych._types import (
    ComplexField,
    ContainerFormatError,
    DimensionError,
    RealGrid,
    ScanPosition,
    as_field,
)

DATASET_MAGIC = b"CPTYDS"
ARRAY_MAGIC = b"CPTYAR"
FORMAT_VERSION = 1

_DATASET_HEADER = struct.Struct("<6sHHIIIIddddq32s")
_ARRAY_HEADER = struct.Struct("<6sHII")

FLAG_GROUND_TRUTH = 1
FLAG_CODED_SURFACE = 2

_F8 = np.dtype("<f8")
_C16 = np.dtype("<c16")


@dataclass(frozen=True, eq=False)
class DatasetContainer:
    measurements: MeasurementSet
    ground_truth: ComplexField | None = None
    coded_surface: ComplexField | None = None
    seed: int = 0
    config_digest: bytes = bytes(32)


def write_dataset(path: str | Path, container: DatasetContainer) -> None:
    meas = container.measurements
    geom = meas.geom
    n1, n2 = meas.object_shape
    flags = 0
    if container.ground_truth is not None:
        flags |= FLAG_GROUND_TRUTH
    if container.coded_surface is not None:
        flags |= FLAG_CODED_SURFACE
    if len(container.config_digest) != 32:
        raise ValueError("config_digest must be 32 bytes")
    header = _DATASET_HEADER.pack(
        DATASET_MAGIC,
        FORMAT_VERSION,
        flags,
        len(meas),
        n1,
        n2,
        geom.sr_ratio,
        geom.wavelength,
        geom.pitch,
        geom.d1,
        geom.d2,
        container.seed,
        container.config_digest,
    )
    positions = np.array([[p.dx, p.dy] for p in meas.positions], dtype=_F8)
    frames = np.stack(meas.frames).astype(_F8)
    extras = [e for e in (container.ground_truth, container.coded_surface) if e is not None]
    for extra in extras:
        if extra.shape != (n1, n2):
            raise DimensionError(
                f"embedded array shape {extra.shape} does not match {(n1, n2)}"
            )
    with open(path, "wb") as f:
        f.write(header)
        f.write(positions.tobytes())
        f.write(frames.tobytes())
        for extra in extras:
            f.write(np.ascontiguousarray(extra, dtype=_C16).tobytes())


class _Reader:
    def __init__(self, data: bytes, path: str | Path) -> None:
        self._data = data
        self._offset = 0
        self._path = path

    def take(self, nbytes: int, what: str) -> bytes:
        end = self._offset + nbytes
        if end > len(self._data):
            raise ContainerFormatError(f"{self._path}: truncated {what} block")
        chunk = self._data[self._offset : end]
        self._offset = end
        return chunk

    def array(self, dtype: np.dtype, shape: tuple[int, ...], what: str) -> np.ndarray:
        count = int(np.prod(shape))
        raw = self.take(count * dtype.itemsize, what)
        return np.frombuffer(raw, dtype=dtype).reshape(shape).astype(dtype.newbyteorder("="))

    def finish(self) -> None:
        if self._offset != len(self._data):
            raise ContainerFormatError(
                f"{self._path}: {len(self._data) - self._offset} trailing bytes"
            )


def _check_magic(path: str | Path, magic: bytes, version: int, expected: bytes) -> None:
    if magic != expected:
        raise ContainerFormatError(f"{path}: bad magic {magic!r}, expected {expected!r}")
    if version != FORMAT_VERSION:
        raise ContainerFormatError(f"{path}: unsupported format version {version}")


def read_dataset(path: str | Path) -> DatasetContainer:
    data = Path(path).read_bytes()
    reader = _Reader(data, path)
    (magic, version, flags, k, n1, n2, r, wavelength, pitch, d1, d2, seed,
     digest) = _DATASET_HEADER.unpack(reader.take(_DATASET_HEADER.size, "header"))
    _check_magic(path, magic, version, DATASET_MAGIC)
    if k < 1 or r < 1 or n1 % r or n2 % r:
        raise ContainerFormatError(f"{path}: inconsistent header (K={k}, {n1}x{n2}, r={r})")
    try:
        geom = OpticalGeometry(wavelength=wavelength, pitch=pitch, d1=d1, d2=d2, sr_ratio=r)
    except ValidationError as exc:
        raise ContainerFormatError(
            f"{path}: invalid geometry in header: {exc.errors()[0]['msg']}"
        ) from exc
    positions = reader.array(_F8, (k, 2), "positions")
    frames = reader.array(_F8, (k, n1 // r, n2 // r), "frames")
    gt = reader.array(_C16, (n1, n2), "object") if flags & FLAG_GROUND_TRUTH else None
    cs = reader.array(_C16, (n1, n2), "surface") if flags & FLAG_CODED_SURFACE else None
    reader.finish()
    try:
        meas = MeasurementSet(
            positions=tuple(ScanPosition(float(dx), float(dy)) for dx, dy in positions),
            frames=tuple(frames),
            geom=geom,
        )
        if gt is not None:
            gt = as_field(gt, name="embedded object")
        if cs is not None:
            cs = CodedSurface(cs).transmittance
    except ValueError as exc:
        raise ContainerFormatError(f"{path}: invalid measurement block: {exc}") from exc
    return DatasetContainer(
        measurements=meas, ground_truth=gt, coded_surface=cs, seed=seed, config_digest=digest
    )


def write_array(path: str | Path, arr: ComplexField) -> None:
    if arr.ndim != 2:
        raise DimensionError(f"array must be 2-D, got shape {arr.shape}")
    rows, cols = arr.shape
    with open(path, "wb") as f:
        f.write(_ARRAY_HEADER.pack(ARRAY_MAGIC, FORMAT_VERSION, rows, cols))
        f.write(np.ascontiguousarray(arr, dtype=_C16).tobytes())


def read_array(path: str | Path) -> ComplexField:
    reader = _Reader(Path(path).read_bytes(), path)
    magic, version, rows, cols = _ARRAY_HEADER.unpack(
        reader.take(_ARRAY_HEADER.size, "header")
    )
    _check_magic(path, magic, version, ARRAY_MAGIC)
    arr = reader.array(_C16, (rows, cols), "data")
    reader.finish()
    return arr


# -- PGM ------------------------------------------------------------------

# Pillow rescales PGM samples to the full range of the image mode.
_PGM_FULL_SCALE = {"L": 255.0, "I": 65535.0, "I;16": 65535.0, "I;16B": 65535.0}


def read_pgm(path: str | Path) -> RealGrid:
    """Read an 8- or 16-bit grayscale PGM (P2 or P5), scaled to [0, 1] by maxval."""
    try:
        with Image.open(path) as img:
            img.load()
            fmt, mode = img.format, img.mode
            samples = np.asarray(img, dtype=np.float64)
    except FileNotFoundError:
        raise
    except (OSError, SyntaxError, ValueError) as exc:
        raise ValueError(f"{path}: truncated or malformed PGM ({exc})") from exc
    if fmt != "PPM" or mode not in _PGM_FULL_SCALE:
        raise ValueError(f"{path}: not a PGM file (format {fmt}, mode {mode})")
    return samples / _PGM_FULL_SCALE[mode]


def write_pgm16(path: str | Path, img: RealGrid) -> None:
    """Write values in [0, 1] as a 16-bit binary PGM (clipped)."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise DimensionError(f"image must be 2-D, got shape {img.shape}")
    samples = np.round(np.clip(img, 0.0, 1.0) * 65535.0).astype(np.int32)
    Image.fromarray(samples).save(path, format="PPM")


def amplitude_preview(field: ComplexField) -> RealGrid:
    """Amplitude scaled by its maximum."""
    amp = np.abs(field)
    peak = float(amp.max())
    return amp / peak if peak > 0 else amp


def phase_preview(field: ComplexField) -> RealGrid:
    """Phase mapped linearly from [-pi, pi] to [0, 1]."""
    return (np.angle(field) + np.pi) / (2.0 * np.pi)
