from __future__ import annotations

import hashlib
import math
import os
import tomllib
import warnings
from pathlib import Path
from typing import Annotated, Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from cptych._types import ConfigError

THREADS_ENV = "CPTYCH_THREADS"

_STRICT = ConfigDict(extra="forbid", frozen=True, allow_inf_nan=False)


def thread_count() -> int:
    """Parallelism cap from ``CPTYCH_THREADS`` (default 1)."""
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if value < 1:
        raise ConfigError(f"{THREADS_ENV} must be >= 1, got {value}")
    return value


class OpticalGeometry(BaseModel):
    """Wavelength, sampling and distances of the coded-ptychography setup.

    All lengths are in meters. ``pitch`` is the object-plane sample spacing;
    one sensor pixel covers ``sr_ratio`` x ``sr_ratio`` object samples.
    """

    model_config = _STRICT

    wavelength: float = Field(default=532e-9, gt=0.0)
    pitch: float = Field(default=1e-6, gt=0.0)
    d1: float = 500e-6
    d2: float = 500e-6
    sr_ratio: int = Field(default=4, ge=1)


class TVProxConfig(BaseModel):
    model_config = ConfigDict(
        extra="forbid", frozen=True, allow_inf_nan=False, populate_by_name=True
    )

    lam: float = Field(default=1e-3, ge=0.0, alias="lambda")
    eta: float = Field(default=0.125, gt=0.0)
    sub_iters: int = Field(default=20, ge=1)
    warm_start: bool = False

    @model_validator(mode="after")
    def _check_eta(self) -> TVProxConfig:
        if self.eta > 0.125:
            warnings.warn(
                f"TV dual step eta={self.eta} exceeds the 1/8 convergence bound",
                RuntimeWarning,
                stacklevel=2,
            )
        return self


class NoNoise(BaseModel):
    model_config = _STRICT

    kind: Literal["none"] = "none"


class PoissonNoise(BaseModel):
    """Shot noise: frames are scaled by ``photon_scale`` photons per unit
    intensity, Poisson-sampled, and scaled back."""

    model_config = _STRICT

    kind: Literal["poisson"] = "poisson"
    photon_scale: float = Field(gt=0.0)
    seed: int = 0


NoiseSpec = Annotated[NoNoise | PoissonNoise, Field(discriminator="kind")]

Algorithm = Literal["epie", "lsq-ml", "pptv"]


class SolverConfig(BaseModel):
    """Reconstruction engine selection and iteration schedule.

    ``cs_update_start`` is the 1-based outer iteration from which the coded
    surface is updated; ``None`` (or any value above ``outer_iters``) keeps it
    fixed. ``lsq_alpha`` of ``None`` means 1e-8 times the mean frame energy.
    ``batch_size`` of ``None`` means K for K <= 8, otherwise 8.
    ``init_object`` picks the starting object of the CLI commands: a flat
    energy-matched object, or the ground truth embedded in the dataset.
    """

    model_config = _STRICT

    algorithm: Algorithm = "pptv"
    outer_iters: int = Field(default=30, ge=1)
    cs_update_start: int | None = None
    alpha1: float = Field(default=1.0, gt=0.0)
    alpha2: float = Field(default=1.0, gt=0.0)
    lsq_alpha: float | None = Field(default=None, gt=0.0)
    tv: TVProxConfig = TVProxConfig()
    batch_size: int | None = Field(default=None, ge=1)
    batch_mode: Literal["sequential", "average"] = "sequential"
    nesterov: bool = True
    init_object: Literal["flat", "ground_truth"] = "flat"
    div_guard: float = Field(default=1e-12, gt=0.0)
    seed: int = 0

    def effective_batch_size(self, num_frames: int) -> int:
        if self.batch_size is not None:
            if self.batch_size > num_frames:
                raise ConfigError(
                    f"solver.batch_size={self.batch_size} exceeds the number "
                    f"of measurements K={num_frames}"
                )
            return self.batch_size
        return num_frames if num_frames <= 8 else 8

    def cs_active(self, iteration: int) -> bool:
        return self.cs_update_start is not None and iteration >= self.cs_update_start


class ScenarioConfig(BaseModel):
    """Synthetic experiment setup.

    ``position_span`` of ``None`` means ``object_size / 8`` samples times the
    geometry pitch. Sources are PGM paths; ``None`` selects the bundled
    stand-in scenes, resampled to ``object_size``.
    """

    model_config = _STRICT

    object_size: tuple[int, int] = (256, 256)
    num_positions: int = Field(default=8, ge=1)
    position_span: float | None = Field(default=None, ge=0.0)
    position_mode: Literal["jittered_grid", "random_uniform"] = "jittered_grid"
    background: float = Field(default=0.2, ge=0.0)
    amp_source: str | None = None
    phase_source: str | None = None
    phase_range: tuple[float, float] = (0.0, math.pi)
    cs_modulus_floor: float = Field(default=0.3, ge=0.0, le=1.0)
    seed: int = 0

    @model_validator(mode="after")
    def _check_size(self) -> ScenarioConfig:
        if min(self.object_size) < 1:
            raise ValueError(f"object_size must be positive, got {self.object_size}")
        return self

    def sensor_size(self, sr_ratio: int) -> tuple[int, int]:
        n1, n2 = self.object_size
        return n1 // sr_ratio, n2 // sr_ratio


class PerturbationConfig(BaseModel):
    model_config = _STRICT

    sigma_amp: float = Field(default=0.1, ge=0.0)
    sigma_ang: float = Field(default=0.3, ge=0.0)
    seed: int = 0


class OutputConfig(BaseModel):
    model_config = _STRICT

    previews: bool = True
    budget_seconds: float | None = Field(default=None, gt=0.0)
    label: str | None = None


class RunConfig(BaseModel):
    """Everything one ``cptych`` command needs, as read from TOML."""

    model_config = _STRICT

    scenario: ScenarioConfig = ScenarioConfig()
    geometry: OpticalGeometry = OpticalGeometry()
    solver: SolverConfig = SolverConfig()
    noise: NoiseSpec = NoNoise()
    perturbation: PerturbationConfig | None = None
    output: OutputConfig = OutputConfig()

    @model_validator(mode="after")
    def _check_consistency(self) -> RunConfig:
        r = self.geometry.sr_ratio
        n1, n2 = self.scenario.object_size
        if n1 % r or n2 % r:
            raise ValueError(
                f"scenario.object_size {self.scenario.object_size} is not "
                f"divisible by geometry.sr_ratio {r}"
            )
        return self

    def with_seed(self, seed: int) -> RunConfig:
        """Return a copy with every seed replaced by *seed*."""
        update: dict[str, Any] = {
            "scenario": self.scenario.model_copy(update={"seed": seed}),
            "solver": self.solver.model_copy(update={"seed": seed}),
        }
        if isinstance(self.noise, PoissonNoise):
            update["noise"] = self.noise.model_copy(update={"seed": seed})
        if self.perturbation is not None:
            update["perturbation"] = self.perturbation.model_copy(update={"seed": seed})
        return self.model_copy(update=update)

    def digest(self) -> bytes:
        """SHA-256 of the canonical JSON form."""
        canonical = self.model_dump_json(by_alias=True)
        return hashlib.sha256(canonical.encode("utf-8")).digest()


def _format_validation_error(exc: ValidationError) -> str:
    first = exc.errors()[0]
    loc = ".".join(str(part) for part in first["loc"])
    if first["type"] == "extra_forbidden":
        return f"unknown configuration key {loc!r}"
    return f"invalid configuration value at {loc!r}: {first['msg']}"


def parse_config(data: dict[str, Any]) -> RunConfig:
    """Validate a raw mapping into a :class:`RunConfig`."""
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_validation_error(exc)) from exc


def load_config(path: str | Path | None) -> RunConfig:
    """Read a TOML run configuration. ``None`` yields all defaults."""
    if path is None:
        return RunConfig()
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(data)
