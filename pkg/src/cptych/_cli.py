from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from cptych._config import RunConfig, load_config, thread_count
from cptych._forward import CodedSurface, simulate_dataset
from cptych._io import (
    DatasetContainer,
    amplitude_preview,
    phase_preview,
    read_dataset,
    write_array,
    write_dataset,
    write_pgm16,
)
from cptych._metrics import trace_export
from cptych._scenario import (
    default_span,
    make_coded_surface,
    make_ground_truth,
    make_positions,
    perturb_coded_surface,
)
from cptych._solvers import ReconstructionState, default_initial_object, run_reconstruction
from cptych._types import ConfigError, CptychError, DivergenceError

logger = logging.getLogger(__name__)

ALGORITHMS = ("epie", "lsq-ml", "pptv")

COMPARE_COLUMNS = (
    "label", "algorithm", "iterations", "fidelity", "objective", "rmse", "seconds", "status",
)
SWEEP_COLUMNS = ("lambda", "iterations", "fidelity", "objective", "rmse", "seconds", "status")


@dataclass(frozen=True)
class RunSummary:
    """Final numbers of one member run of ``compare`` or ``sweep-lambda``."""

    label: str
    algorithm: str
    lam: float
    iterations: int
    fidelity: float | None
    objective: float | None
    rmse: float | None
    seconds: float
    status: str


def _load(config_path: str | Path | None, seed: int | None) -> RunConfig:
    cfg = load_config(config_path)
    return cfg if seed is None else cfg.with_seed(seed)


def cmd_simulate(
    config_path: str | Path | None, out_path: str | Path, *, seed: int | None = None
) -> DatasetContainer:
    """Build the configured scenario and write its dataset container."""
    cfg = _load(config_path, seed)
    sc = cfg.scenario
    geom = cfg.geometry
    gt = make_ground_truth(sc)
    cs = make_coded_surface(sc.object_size, sc.seed, modulus_floor=sc.cs_modulus_floor)
    positions = make_positions(
        sc.num_positions, default_span(sc, geom), sc.position_mode, sc.seed + 1
    )
    meas = simulate_dataset(gt, cs, positions, geom, cfg.noise)
    container = DatasetContainer(
        measurements=meas,
        ground_truth=gt,
        coded_surface=cs.transmittance,
        seed=sc.seed,
        config_digest=cfg.digest(),
    )
    write_dataset(out_path, container)
    logger.info(
        "Wrote %d frames of %s sensor pixels to %s",
        len(meas),
        sc.sensor_size(geom.sr_ratio),
        out_path,
    )
    return container


def _initial_surface(container: DatasetContainer, cfg: RunConfig) -> CodedSurface:
    if container.coded_surface is None:
        raise ConfigError("dataset carries no coded surface to initialize from")
    cs = CodedSurface(container.coded_surface)
    if cfg.perturbation is not None:
        cs = perturb_coded_surface(cs, cfg.perturbation)
    return cs


def _write_results(out_dir: Path, state: ReconstructionState, previews: bool) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_array(out_dir / "object.cptyar", state.object)
    write_array(out_dir / "surface.cptyar", state.cs.transmittance)
    with open(out_dir / "trace.csv", "w", newline="") as f:
        trace_export(state.trace, f)
    if previews:
        write_pgm16(out_dir / "amplitude.pgm", amplitude_preview(state.object))
        write_pgm16(out_dir / "phase.pgm", phase_preview(state.object))


def _reconstruct(
    container: DatasetContainer,
    cfg: RunConfig,
    out_dir: Path,
    budget_seconds: float | None,
) -> ReconstructionState:
    meas = container.measurements
    cs = _initial_surface(container, cfg)
    if cfg.solver.init_object == "ground_truth":
        if container.ground_truth is None:
            raise ConfigError("dataset carries no ground truth to initialize from")
        init = container.ground_truth
    else:
        init = default_initial_object(meas, cs)
    state = run_reconstruction(
        meas,
        init,
        cs,
        cfg.solver,
        container.ground_truth,
        budget_seconds=budget_seconds,
    )
    _write_results(out_dir, state, cfg.output.previews)
    return state


def cmd_reconstruct(
    dataset_path: str | Path,
    config_path: str | Path | None,
    out_dir: str | Path,
    *,
    seed: int | None = None,
    algorithm: str | None = None,
) -> ReconstructionState:
    """Reconstruct one dataset; writes object, surface, trace and previews."""
    cfg = _load(config_path, seed)
    if algorithm is not None:
        if algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {algorithm!r}")
        cfg = cfg.model_copy(
            update={"solver": cfg.solver.model_copy(update={"algorithm": algorithm})}
        )
    container = read_dataset(dataset_path)
    state = _reconstruct(container, cfg, Path(out_dir), cfg.output.budget_seconds)
    logger.info("Wrote reconstruction to %s", out_dir)
    return state


def _summarize(
    label: str,
    container: DatasetContainer,
    cfg: RunConfig,
    out_dir: Path,
    budget_seconds: float | None,
) -> RunSummary:
    start = time.perf_counter()
    try:
        state = _reconstruct(container, cfg, out_dir, budget_seconds)
    except CptychError as exc:
        logger.error("Run %s failed: %s", label, exc)
        status = f"failed: {exc}"
        if isinstance(exc, DivergenceError):
            status += f" (last good iteration {exc.last_good_iteration})"
        return RunSummary(
            label, cfg.solver.algorithm, cfg.solver.tv.lam, 0, None, None, None,
            time.perf_counter() - start, status,
        )
    final = state.trace.final
    assert final is not None
    return RunSummary(
        label=label,
        algorithm=cfg.solver.algorithm,
        lam=cfg.solver.tv.lam,
        iterations=final.iteration,
        fidelity=final.fidelity,
        objective=final.objective,
        rmse=final.rmse,
        seconds=final.seconds,
        status="ok",
    )


def _fmt(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def _run_members(
    jobs: list[tuple[str, RunConfig]],
    container: DatasetContainer,
    out_dir: Path,
    budget_seconds: float | None,
) -> list[RunSummary]:
    def run(job: tuple[str, RunConfig]) -> RunSummary:
        label, cfg = job
        budget = budget_seconds if budget_seconds is not None else cfg.output.budget_seconds
        return _summarize(label, container, cfg, out_dir / label, budget)

    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        return list(pool.map(run, jobs))


def cmd_compare(
    dataset_path: str | Path,
    config_paths: Sequence[str | Path],
    out_dir: str | Path,
    *,
    budget_seconds: float | None = None,
    seed: int | None = None,
) -> list[RunSummary]:
    """Run several solver configs on one dataset under a matched time budget."""
    if len(config_paths) < 2:
        raise ConfigError("compare needs at least two configurations")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    container = read_dataset(dataset_path)
    jobs: list[tuple[str, RunConfig]] = []
    for i, path in enumerate(config_paths):
        cfg = _load(path, seed)
        label = cfg.output.label or f"{i}-{cfg.solver.algorithm}"
        jobs.append((label, cfg))
    rows = _run_members(jobs, container, out, budget_seconds)
    with open(out / "comparison.csv", "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(COMPARE_COLUMNS)
        for row in rows:
            writer.writerow(
                [row.label, row.algorithm, row.iterations, _fmt(row.fidelity),
                 _fmt(row.objective), _fmt(row.rmse), _fmt(row.seconds), row.status]
            )
    return rows


def cmd_sweep_lambda(
    dataset_path: str | Path,
    config_path: str | Path | None,
    lambdas: Sequence[float],
    out_dir: str | Path,
    *,
    seed: int | None = None,
) -> list[RunSummary]:
    """One PPTV run per regularization weight."""
    if not lambdas:
        raise ConfigError("sweep-lambda needs at least one lambda")
    if any(lam < 0 for lam in lambdas):
        raise ConfigError(f"lambdas must be >= 0, got {list(lambdas)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    base = _load(config_path, seed)
    container = read_dataset(dataset_path)
    jobs: list[tuple[str, RunConfig]] = []
    for i, lam in enumerate(lambdas):
        tv = base.solver.tv.model_copy(update={"lam": float(lam)})
        solver = base.solver.model_copy(update={"algorithm": "pptv", "tv": tv})
        jobs.append((f"{i}-lambda-{lam:g}", base.model_copy(update={"solver": solver})))
    rows = _run_members(jobs, container, out, None)
    with open(out / "sweep.csv", "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow(
                [_fmt(row.lam), row.iterations, _fmt(row.fidelity), _fmt(row.objective),
                 _fmt(row.rmse), _fmt(row.seconds), row.status]
            )
    return rows


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cptych", description="Coded-ptychography simulation and reconstruction"
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simulate a dataset container")
    sim.add_argument("--config", type=Path)
    sim.add_argument("--out", type=Path, required=True)
    sim.add_argument("--seed", type=int)

    rec = sub.add_parser("reconstruct", help="reconstruct a dataset")
    rec.add_argument("dataset", type=Path)
    rec.add_argument("--config", type=Path)
    rec.add_argument("--out", type=Path, required=True)
    rec.add_argument("--seed", type=int)
    rec.add_argument("--algorithm", choices=ALGORITHMS)

    cmp_ = sub.add_parser("compare", help="compare solver configurations")
    cmp_.add_argument("dataset", type=Path)
    cmp_.add_argument("--config", type=Path, action="append", required=True)
    cmp_.add_argument("--out", type=Path, required=True)
    cmp_.add_argument("--seed", type=int)
    cmp_.add_argument("--budget-seconds", type=float)

    sweep = sub.add_parser("sweep-lambda", help="PPTV runs over regularization weights")
    sweep.add_argument("dataset", type=Path)
    sweep.add_argument("--config", type=Path)
    sweep.add_argument("--lambdas", type=float, nargs="+", required=True)
    sweep.add_argument("--out", type=Path, required=True)
    sweep.add_argument("--seed", type=int)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "simulate":
            cmd_simulate(args.config, args.out, seed=args.seed)
        elif args.command == "reconstruct":
            cmd_reconstruct(
                args.dataset, args.config, args.out, seed=args.seed, algorithm=args.algorithm
            )
        elif args.command == "compare":
            cmd_compare(
                args.dataset, args.config, args.out,
                budget_seconds=args.budget_seconds, seed=args.seed,
            )
        else:
            cmd_sweep_lambda(args.dataset, args.config, args.lambdas, args.out, seed=args.seed)
    except DivergenceError as exc:
        print(
            f"cptych: error: {exc} (last good iteration {exc.last_good_iteration})",
            file=sys.stderr,
        )
        return 1
    except (CptychError, OSError) as exc:
        print(f"cptych: error: {exc}", file=sys.stderr)
        return 1
    return 0
