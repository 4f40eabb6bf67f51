"""Reconstruction engines: ePIE, LSQ-ML and PPTV.

Each outer iteration sweeps shuffled mini-batches of scan positions. For every
position the current object wave is pushed to the sensor plane, its modulus is
replaced by the measured one, and the corrected wave is pulled back to the
coded surface where an :class:`UpdateEngine` turns the residual into object
and coded-surface corrections. PPTV follows each batch with the TV prox at the
object plane.
"""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from cptych._config import OpticalGeometry, SolverConfig, thread_count
from cptych._field import bin_intensity, propagate, shift, upsample_adjoint
from cptych._forward import CodedSurface, MeasurementSet, sensor_field
from cptych._metrics import (
    ConvergenceTrace,
    MetricReport,
    TraceRecord,
    aligned_rmse,
)
from cptych._tv import DualState, tv_prox_dual, tv_seminorm
from cptych._types import (
    ComplexField,
    DimensionError,
    DivergenceError,
    RealGrid,
    ScanPosition,
    as_field,
    check_same_shape,
)

logger = logging.getLogger(__name__)

FLAG_OBJECT_SKIPPED = "object_update_skipped"
FLAG_CS_SKIPPED = "cs_update_skipped"
FLAG_LSQ_SINGULAR = "lsq_singular"

# Relative determinant below which the LSQ 2x2 system counts as singular.
_SINGULAR_RTOL = 1e-14


@dataclass
class ReconstructionState:
    object: ComplexField
    cs: CodedSurface
    iteration: int = 0
    trace: ConvergenceTrace = field(default_factory=ConvergenceTrace)


# -- Step 1: sensor plane -------------------------------------------------


def _amplitude_ratio(psi_s: ComplexField, frame: RealGrid, r: int, guard: float) -> RealGrid:
    """sqrt(I) / sqrt(S|psi|^2) on sensor pixels, 1 where the energy is ~0."""
    energy = bin_intensity(np.abs(psi_s) ** 2, r)
    if energy.shape != frame.shape:
        raise DimensionError(
            f"binned field shape {energy.shape} does not match frame shape {frame.shape}"
        )
    threshold = guard * float(energy.mean())
    ok = energy > threshold
    ratio = np.ones_like(energy)
    ratio[ok] = np.sqrt(frame[ok]) / np.sqrt(energy[ok])
    return ratio


def fidelity_gradient(
    psi_s: ComplexField, frame: RealGrid, r: int, *, guard: float = 1e-12
) -> ComplexField:
    """Wirtinger gradient of ``1/2 ||sqrt(S|psi|^2) - sqrt(I)||^2``.

    Sensor pixels whose energy is below ``guard`` times the mean contribute
    no gradient.
    """
    ratio = _amplitude_ratio(psi_s, frame, r, guard)
    return 0.5 * psi_s * upsample_adjoint(1.0 - ratio, r)


def modulus_project(
    psi_s: ComplexField, frame: RealGrid, r: int, *, guard: float = 1e-12
) -> ComplexField:
    """Replace binned amplitudes by measured ones, keeping phases.

    Equal to ``psi_s - 2 * fidelity_gradient(psi_s, frame, r)``.
    """
    ratio = _amplitude_ratio(psi_s, frame, r, guard)
    return psi_s * upsample_adjoint(ratio, r)


def _frame_fidelity(psi_s: ComplexField, frame: RealGrid, r: int) -> float:
    amp = np.sqrt(bin_intensity(np.abs(psi_s) ** 2, r))
    return float(0.5 * np.sum((amp - np.sqrt(frame)) ** 2))


def fidelity_error_of(
    obj: ComplexField, cs: CodedSurface, measurements: MeasurementSet
) -> float:
    """Amplitude fidelity averaged over K (the 1/2K data term)."""
    geom = measurements.geom
    total = 0.0
    for pos, frame in zip(measurements.positions, measurements.frames):
        total += _frame_fidelity(sensor_field(obj, cs, pos, geom), frame, geom.sr_ratio)
    return total / len(measurements)


def fidelity_error(state: ReconstructionState, measurements: MeasurementSet) -> float:
    return fidelity_error_of(state.object, state.cs, measurements)


def objective_value(
    state: ReconstructionState, measurements: MeasurementSet, lam: float
) -> float:
    """Data term plus ``lam * TV(object)``."""
    return fidelity_error(state, measurements) + lam * tv_seminorm(state.object)


# -- Step 2: coded-surface plane ------------------------------------------


def error_metric(
    psi_cs: ComplexField,
    psi_u: ComplexField,
    cs: ComplexField,
    pos: ScanPosition,
    geom: OpticalGeometry,
) -> float:
    """``||psi_cs - shift(psi_u) * cs||^2``."""
    resid = psi_cs - shift(psi_u, pos, geom) * cs
    return float(np.vdot(resid, resid).real)


@dataclass(frozen=True, eq=False)
class StepUpdate:
    """Corrections from one scan position.

    ``delta_object`` lives in the shifted frame (caller un-shifts it);
    ``delta_cs`` is ``None`` when the surface is not being updated.
    """

    delta_object: ComplexField
    delta_cs: ComplexField | None
    flags: tuple[str, ...] = ()


def epie_update(
    psi_cs_corrected: ComplexField,
    psi_us: ComplexField,
    cs: ComplexField,
    alpha1: float,
    alpha2: float,
    *,
    update_cs: bool = True,
) -> StepUpdate:
    """Classic ePIE step: gradient descent on the coded-surface error with
    ``alpha1 / max|cs|^2`` and ``alpha2 / max|psi_us|^2`` step sizes.

    With ``update_cs=False`` only the object correction is computed."""
    check_same_shape(psi_cs_corrected, psi_us, "epie_update")
    check_same_shape(psi_us, cs, "epie_update")
    resid = psi_cs_corrected - psi_us * cs
    flags: list[str] = []
    cs_max = float(np.max(np.abs(cs) ** 2))
    if cs_max > 0.0:
        delta_obj = (alpha1 / cs_max) * np.conj(cs) * resid
    else:
        delta_obj = np.zeros_like(resid)
        flags.append(FLAG_OBJECT_SKIPPED)
    if not update_cs:
        return StepUpdate(delta_obj, None, tuple(flags))
    obj_max = float(np.max(np.abs(psi_us) ** 2))
    if obj_max > 0.0:
        delta_cs = (alpha2 / obj_max) * np.conj(psi_us) * resid
    else:
        delta_cs = np.zeros_like(resid)
        flags.append(FLAG_CS_SKIPPED)
    return StepUpdate(delta_obj, delta_cs, tuple(flags))


def error_metric_gradients(
    psi_cs: ComplexField,
    psi_u: ComplexField,
    cs: ComplexField,
    pos: ScanPosition,
    geom: OpticalGeometry,
) -> tuple[ComplexField, ComplexField]:
    """Wirtinger gradients of the coded-surface error w.r.t. psi_u and cs."""
    psi_us = shift(psi_u, pos, geom)
    mismatch = psi_us * cs - psi_cs
    grad_u = shift(np.conj(cs) * mismatch, -pos, geom)
    grad_cs = np.conj(psi_us) * mismatch
    return grad_u, grad_cs


def lsq_step_sizes(
    residual: ComplexField,
    dir_obj: ComplexField,
    dir_cs: ComplexField,
    psi_us: ComplexField,
    cs: ComplexField,
    alpha: float,
) -> tuple[float, float, bool]:
    """Real step sizes from the regularized 2x2 least-squares system.

    Returns ``(beta_u, beta_cs, singular)``; a singular system yields zeros.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    a = dir_obj * cs
    b = dir_cs * psi_us
    m00 = float(np.vdot(a, a).real) + alpha
    m11 = float(np.vdot(b, b).real) + alpha
    m01 = float(np.vdot(a, b).real)
    r0 = float(np.vdot(a, residual).real)
    r1 = float(np.vdot(b, residual).real)
    det = m00 * m11 - m01 * m01
    if not det > _SINGULAR_RTOL * m00 * m11:
        return 0.0, 0.0, True
    beta_u = (m11 * r0 - m01 * r1) / det
    beta_cs = (m00 * r1 - m01 * r0) / det
    if not (math.isfinite(beta_u) and math.isfinite(beta_cs)):
        return 0.0, 0.0, True
    return beta_u, beta_cs, False


class UpdateEngine(Protocol):
    """Turns a corrected coded-surface wave into object/surface corrections."""

    def update(
        self,
        psi_cs: ComplexField,
        psi_us: ComplexField,
        cs: ComplexField,
        update_cs: bool,
    ) -> StepUpdate: ...


class EPIEEngine:
    def __init__(self, alpha1: float, alpha2: float) -> None:
        self._alpha1 = alpha1
        self._alpha2 = alpha2

    def update(
        self,
        psi_cs: ComplexField,
        psi_us: ComplexField,
        cs: ComplexField,
        update_cs: bool,
    ) -> StepUpdate:
        return epie_update(
            psi_cs, psi_us, cs, self._alpha1, self._alpha2, update_cs=update_cs
        )


class LSQEngine:
    """Steepest-descent directions scaled by the least-squares step sizes."""

    def __init__(self, alpha: float) -> None:
        self._alpha = alpha

    def update(
        self,
        psi_cs: ComplexField,
        psi_us: ComplexField,
        cs: ComplexField,
        update_cs: bool,
    ) -> StepUpdate:
        resid = psi_cs - psi_us * cs
        dir_obj = np.conj(cs) * resid
        if not update_cs:
            a = dir_obj * cs
            denom = float(np.vdot(a, a).real) + self._alpha
            beta_u = float(np.vdot(a, resid).real) / denom
            return StepUpdate(beta_u * dir_obj, None)
        dir_cs = np.conj(psi_us) * resid
        beta_u, beta_cs, singular = lsq_step_sizes(
            resid, dir_obj, dir_cs, psi_us, cs, self._alpha
        )
        logger.debug("LSQ steps beta_u=%.4g beta_cs=%.4g", beta_u, beta_cs)
        flags = (FLAG_LSQ_SINGULAR,) if singular else ()
        return StepUpdate(beta_u * dir_obj, beta_cs * dir_cs, flags)


def make_engine(cfg: SolverConfig, measurements: MeasurementSet) -> UpdateEngine:
    if cfg.algorithm == "lsq-ml":
        alpha = cfg.lsq_alpha
        if alpha is None:
            alpha = 1e-8 * measurements.mean_frame_energy or 1e-30
        return LSQEngine(alpha)
    return EPIEEngine(cfg.alpha1, cfg.alpha2)


# -- Outer loop -----------------------------------------------------------


def default_initial_object(measurements: MeasurementSet, cs: CodedSurface) -> ComplexField:
    """Flat object whose simulated frame energy matches the mean measured one."""
    surface_energy = float(np.sum(np.abs(cs.transmittance) ** 2))
    if surface_energy == 0.0:
        raise ValueError("coded surface is identically zero")
    amp = math.sqrt(measurements.mean_frame_energy / surface_energy)
    return np.full(measurements.object_shape, amp, dtype=np.complex128)


class Reconstructor:
    """Stateful driver of one reconstruction run.

    Not safe for concurrent use; every run should own its instance.

    Usage::

        rec = Reconstructor(measurements, init_object, init_cs, cfg)
        state = rec.run(budget_seconds=60.0)
    """

    def __init__(
        self,
        measurements: MeasurementSet,
        init_object: ComplexField,
        init_cs: CodedSurface,
        cfg: SolverConfig,
        ground_truth: ComplexField | None = None,
    ) -> None:
        obj = as_field(init_object, name="initial object")
        if obj.shape != measurements.object_shape:
            raise DimensionError(
                f"initial object shape {obj.shape} does not match "
                f"measurement object shape {measurements.object_shape}"
            )
        check_same_shape(obj, init_cs.transmittance, "initial coded surface")
        if ground_truth is not None:
            ground_truth = as_field(ground_truth, name="ground truth")
            check_same_shape(obj, ground_truth, "ground truth")
        self._meas = measurements
        self._geom = measurements.geom
        self._cfg = cfg
        self._batch_size = cfg.effective_batch_size(len(measurements))
        self._engine = make_engine(cfg, measurements)
        self._gt = ground_truth
        self._rng = np.random.Generator(np.random.Philox(cfg.seed))
        self._regularize = cfg.algorithm == "pptv" and cfg.tv.lam > 0.0
        self._dual: DualState | None = None
        self.state = ReconstructionState(object=obj.copy(), cs=init_cs)

    @property
    def config(self) -> SolverConfig:
        return self._cfg

    def run(
        self,
        *,
        budget_seconds: float | None = None,
        on_iteration: Callable[[ReconstructionState], None] | None = None,
    ) -> ReconstructionState:
        """Execute up to ``outer_iters`` iterations (or until the budget ends)."""
        geom = self._geom
        cfg = self._cfg
        start = time.perf_counter()
        prev_obj = self.state.object
        psi_u = propagate(self.state.object, geom.d1, geom)
        phi = self.state.cs.transmittance
        for j in range(self.state.iteration + 1, cfg.outer_iters + 1):
            update_cs = cfg.cs_active(j)
            flags: set[str] = set()
            order = self._rng.permutation(len(self._meas))
            for lo in range(0, len(order), self._batch_size):
                batch = [int(k) for k in order[lo : lo + self._batch_size]]
                if cfg.batch_mode == "average":
                    psi_u, phi = self._average_batch(batch, psi_u, phi, update_cs, flags)
                else:
                    psi_u, phi = self._sequential_batch(batch, psi_u, phi, update_cs, flags)
                if self._regularize:
                    psi_u = self._regularization_step(psi_u)
                if not (np.all(np.isfinite(psi_u)) and np.all(np.isfinite(phi))):
                    raise DivergenceError(
                        f"non-finite values in iteration {j}",
                        last_good_iteration=j - 1,
                    )

            obj = propagate(psi_u, -geom.d1, geom)
            if cfg.nesterov:
                eps = j / (j + 3.0)
                psi_u = propagate(obj + eps * (obj - prev_obj), geom.d1, geom)
            prev_obj = obj

            self.state.object = obj
            self.state.cs = CodedSurface(phi)
            self.state.iteration = j
            self._record(j, time.perf_counter() - start, flags)
            if on_iteration is not None:
                on_iteration(self.state)
            if budget_seconds is not None and time.perf_counter() - start >= budget_seconds:
                logger.info("Time budget of %.1f s reached after %d iterations", budget_seconds, j)
                break
        return self.state

    def _position_update(
        self,
        k: int,
        psi_u: ComplexField,
        phi: ComplexField,
        update_cs: bool,
    ) -> StepUpdate:
        geom = self._geom
        pos = self._meas.positions[k]
        psi_us = shift(psi_u, pos, geom)
        psi_s = propagate(psi_us * phi, geom.d2, geom)
        psi_s = modulus_project(
            psi_s, self._meas.frames[k], geom.sr_ratio, guard=self._cfg.div_guard
        )
        psi_cs = propagate(psi_s, -geom.d2, geom)
        step = self._engine.update(psi_cs, psi_us, phi, update_cs)
        return StepUpdate(shift(step.delta_object, -pos, geom), step.delta_cs, step.flags)

    def _sequential_batch(
        self,
        batch: list[int],
        psi_u: ComplexField,
        phi: ComplexField,
        update_cs: bool,
        flags: set[str],
    ) -> tuple[ComplexField, ComplexField]:
        for k in batch:
            step = self._position_update(k, psi_u, phi, update_cs)
            flags.update(step.flags)
            psi_u = psi_u + step.delta_object
            if step.delta_cs is not None:
                phi = CodedSurface.clamped(phi + step.delta_cs).transmittance
        return psi_u, phi

    def _average_batch(
        self,
        batch: list[int],
        psi_u: ComplexField,
        phi: ComplexField,
        update_cs: bool,
        flags: set[str],
    ) -> tuple[ComplexField, ComplexField]:
        with ThreadPoolExecutor(max_workers=thread_count()) as pool:
            steps = list(
                pool.map(lambda k: self._position_update(k, psi_u, phi, update_cs), batch)
            )
        for step in steps:
            flags.update(step.flags)
        n = len(steps)
        psi_u = psi_u + sum((s.delta_object for s in steps), np.zeros_like(psi_u)) / n
        deltas = [s.delta_cs for s in steps if s.delta_cs is not None]
        if deltas:
            phi = CodedSurface.clamped(phi + sum(deltas, np.zeros_like(phi)) / n).transmittance
        return psi_u, phi

    def _regularization_step(self, psi_u: ComplexField) -> ComplexField:
        geom = self._geom
        tv = self._cfg.tv
        psi_o = propagate(psi_u, -geom.d1, geom)
        warm = self._dual if tv.warm_start else None
        obj, dual = tv_prox_dual(psi_o, tv, warm)
        self._dual = dual
        return propagate(obj, geom.d1, geom)

    def _record(self, iteration: int, seconds: float, flags: set[str]) -> None:
        fid = fidelity_error(self.state, self._meas)
        objective = fid + self._cfg.tv.lam * tv_seminorm(self.state.object)
        rmse = None
        if self._gt is not None:
            rmse, _ = aligned_rmse(self.state.object, self._gt)
        for flag in sorted(flags):
            logger.warning("Iteration %d: %s", iteration, flag)
        self.state.trace.append(
            TraceRecord(
                iteration=iteration,
                fidelity=fid,
                objective=objective,
                rmse=rmse,
                seconds=seconds,
                flags=tuple(sorted(flags)),
            )
        )
        logger.info(
            "[%s] iter %d fidelity=%.6g objective=%.6g rmse=%s",
            self._cfg.algorithm,
            iteration,
            fid,
            objective,
            "n/a" if rmse is None else f"{rmse:.6g}",
        )


def run_reconstruction(
    measurements: MeasurementSet,
    init_object: ComplexField,
    init_cs: CodedSurface,
    cfg: SolverConfig,
    ground_truth: ComplexField | None = None,
    *,
    budget_seconds: float | None = None,
    on_iteration: Callable[[ReconstructionState], None] | None = None,
) -> ReconstructionState:
    """Run the configured engine and return the final state with its trace."""
    rec = Reconstructor(measurements, init_object, init_cs, cfg, ground_truth)
    return rec.run(budget_seconds=budget_seconds, on_iteration=on_iteration)


def evaluate(
    state: ReconstructionState,
    measurements: MeasurementSet,
    lam: float,
    ground_truth: ComplexField,
    runtime_seconds: float,
) -> MetricReport:
    rmse, c = aligned_rmse(state.object, ground_truth)
    fid = fidelity_error(state, measurements)
    return MetricReport(
        rmse=rmse,
        aligned_scalar=c,
        fidelity=fid,
        objective=fid + lam * tv_seminorm(state.object),
        runtime_seconds=runtime_seconds,
    )
