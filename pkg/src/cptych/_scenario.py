"""Synthetic experiment construction.

All randomness comes from ``numpy.random.Philox`` (a 64-bit counter-based
generator) keyed by the configured seed, so every generator here is a pure
function of its arguments.
"""

from __future__ import annotations

import logging
import math
from importlib import resources
from pathlib import Path
from typing import Literal

import numpy as np
from PIL import Image

from cptych._config import OpticalGeometry, PerturbationConfig, ScenarioConfig
from cptych._forward import CodedSurface
from cptych._io import read_pgm
from cptych._types import (
    ComplexField,
    ConfigError,
    DimensionError,
    RealGrid,
    ScanPosition,
)

logger = logging.getLogger(__name__)

PositionMode = Literal["jittered_grid", "random_uniform"]
BUILTIN_SOURCES = ("street", "peppers")


def philox(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def resample(img: RealGrid, shape: tuple[int, int]) -> RealGrid:
    """Bilinear resampling of a [0, 1] image onto *shape* (rows, cols)."""
    img = np.asarray(img, dtype=np.float64)
    if img.shape == shape:
        return img
    resized = Image.fromarray(img.astype(np.float32)).resize(
        (shape[1], shape[0]), Image.Resampling.BILINEAR
    )
    return np.clip(np.asarray(resized, dtype=np.float64), 0.0, 1.0)


def builtin_source(name: str, shape: tuple[int, int]) -> RealGrid:
    """Bundled stand-in scene (``street`` or ``peppers``) resampled to *shape*."""
    if name not in BUILTIN_SOURCES:
        raise ValueError(f"unknown built-in source {name!r}")
    resource = resources.files("cptych") / "images" / f"{name}.pgm"
    with resources.as_file(resource) as path:
        img = read_pgm(path)
    return resample(img, shape)


def _load_source(path: str | None, builtin: str, shape: tuple[int, int]) -> RealGrid:
    if path is None:
        logger.debug("No source configured; using the bundled %s scene", builtin)
        return builtin_source(builtin, shape)
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"ground-truth source {path!r} does not exist")
    try:
        img = read_pgm(p)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if img.shape != shape:
        raise DimensionError(
            f"ground-truth source {path!r} has shape {img.shape}, expected {shape}"
        )
    return img


def make_ground_truth(
    cfg: ScenarioConfig,
    amplitude: RealGrid | None = None,
    phase: RealGrid | None = None,
) -> ComplexField:
    """``(amp + background) * exp(j * phase)`` from two grayscale sources.

    Sources are grayscale images in [0, 1]. Explicit arrays take precedence
    over the configured PGM paths; with neither, the bundled stand-in scenes
    are used. The phase source is mapped linearly onto ``cfg.phase_range``.
    """
    shape = cfg.object_size
    if amplitude is None:
        amplitude = _load_source(cfg.amp_source, "street", shape)
    if phase is None:
        phase = _load_source(cfg.phase_source, "peppers", shape)
    amplitude = np.asarray(amplitude, dtype=np.float64)
    phase = np.asarray(phase, dtype=np.float64)
    for name, img in (("amplitude", amplitude), ("phase", phase)):
        if img.shape != shape:
            raise DimensionError(f"{name} source has shape {img.shape}, expected {shape}")
        if not (np.all(np.isfinite(img)) and img.min() >= 0.0 and img.max() <= 1.0):
            raise ValueError(f"{name} source must lie in [0, 1]")
    lo, hi = cfg.phase_range
    return (amplitude + cfg.background) * np.exp(1j * (lo + (hi - lo) * phase))


def make_coded_surface(
    size: tuple[int, int], seed: int, *, modulus_floor: float = 0.3
) -> CodedSurface:
    """I.i.d. random transmittance: modulus in [floor, 1], phase in [0, 2pi)."""
    if not 0.0 <= modulus_floor <= 1.0:
        raise ValueError(f"modulus_floor must lie in [0, 1], got {modulus_floor}")
    rng = philox(seed)
    modulus = rng.uniform(modulus_floor, 1.0, size=size)
    angle = rng.uniform(0.0, 2.0 * np.pi, size=size)
    return CodedSurface(modulus * np.exp(1j * angle))


def perturb_coded_surface(cs: CodedSurface, pcfg: PerturbationConfig) -> CodedSurface:
    """Gaussian amplitude and phase noise, then modulus clamped to [0, 1]."""
    rng = philox(pcfg.seed)
    t = cs.transmittance
    amp = np.abs(t) + rng.normal(0.0, pcfg.sigma_amp, size=t.shape)
    ang = np.angle(t) + rng.normal(0.0, pcfg.sigma_ang, size=t.shape)
    amp = np.clip(amp, 0.0, 1.0)
    return CodedSurface(amp * np.exp(1j * ang))


def default_span(cfg: ScenarioConfig, geom: OpticalGeometry) -> float:
    if cfg.position_span is not None:
        return cfg.position_span
    return min(cfg.object_size) / 8 * geom.pitch


def make_positions(
    k: int, span: float, mode: PositionMode = "jittered_grid", seed: int = 0
) -> list[ScanPosition]:
    """K distinct lateral offsets within ``[-span, span]`` on both axes.

    ``jittered_grid`` draws K cells of the smallest square grid holding K and
    jitters each cell centre by up to a quarter cell.
    """
    if k < 1:
        raise ValueError(f"number of positions must be >= 1, got {k}")
    if k == 1:
        return [ScanPosition(0.0, 0.0)]
    rng = philox(seed)
    if mode == "random_uniform":
        pts = rng.uniform(-span, span, size=(k, 2))
    elif mode == "jittered_grid":
        side = math.ceil(math.sqrt(k))
        cell = 2.0 * span / side
        cells = rng.permutation(side * side)[:k]
        rows, cols = np.divmod(cells, side)
        centres = np.stack([cols, rows], axis=1) * cell - span + cell / 2
        pts = centres + rng.uniform(-cell / 4, cell / 4, size=(k, 2))
    else:
        raise ValueError(f"unknown position mode {mode!r}")
    return [ScanPosition(float(dx), float(dy)) for dx, dy in pts]
