from __future__ import annotations

import csv
import logging
from collections.abc import Iterator
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from cptych._types import ComplexField, check_same_shape

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ("iteration", "fidelity", "objective", "rmse", "seconds")


@dataclass(frozen=True)
class TraceRecord:
    """One completed outer iteration."""

    iteration: int
    fidelity: float
    objective: float
    rmse: float | None
    seconds: float
    flags: tuple[str, ...] = ()


@dataclass
class ConvergenceTrace:
    records: list[TraceRecord] = field(default_factory=list)

    def append(self, record: TraceRecord) -> None:
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[TraceRecord]:
        return iter(self.records)

    def __getitem__(self, index: int) -> TraceRecord:
        return self.records[index]

    @property
    def final(self) -> TraceRecord | None:
        return self.records[-1] if self.records else None

    def at_iteration(self, iteration: int) -> TraceRecord:
        for record in self.records:
            if record.iteration == iteration:
                return record
        raise KeyError(f"No trace record for iteration {iteration}")


@dataclass(frozen=True)
class MetricReport:
    rmse: float
    aligned_scalar: complex
    fidelity: float
    objective: float
    runtime_seconds: float


def aligned_rmse(rec: ComplexField, gt: ComplexField) -> tuple[float, complex]:
    """Relative RMSE after removing the best global complex factor.

    ``c = <gt, rec> / ||rec||^2`` and ``rmse = ||c*rec - gt|| / ||gt||``.
    A zero reconstruction yields ``(1.0, 0)``.
    """
    check_same_shape(rec, gt, "aligned_rmse")
    gt_norm = float(np.linalg.norm(gt))
    if gt_norm == 0.0:
        raise ValueError("ground truth must not be identically zero")
    rec_energy = float(np.vdot(rec, rec).real)
    if rec_energy == 0.0:
        logger.warning("aligned_rmse: reconstruction has zero norm")
        return 1.0, 0j
    c = complex(np.vdot(rec, gt) / rec_energy)
    rmse = float(np.linalg.norm(c * rec - gt)) / gt_norm
    return rmse, c


def _fmt(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def trace_export(trace: ConvergenceTrace, out: TextIO) -> None:
    """Write *trace* as CSV, one row per iteration."""
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for rec in trace:
        writer.writerow(
            [
                rec.iteration,
                _fmt(rec.fidelity),
                _fmt(rec.objective),
                _fmt(rec.rmse),
                _fmt(rec.seconds),
            ]
        )


def trace_import(src: TextIO) -> ConvergenceTrace:
    """Parse a table written by :func:`trace_export`."""
    reader = csv.reader(src)
    header = next(reader, None)
    if header is None or tuple(header) != TRACE_COLUMNS:
        raise ValueError(f"Unexpected trace header: {header!r}")
    trace = ConvergenceTrace()
    for row in reader:
        if not row:
            continue
        iteration, fidelity, objective, rmse, seconds = row
        trace.append(
            TraceRecord(
                iteration=int(iteration),
                fidelity=float(fidelity),
                objective=float(objective),
                rmse=float(rmse) if rmse else None,
                seconds=float(seconds),
            )
        )
    return trace
