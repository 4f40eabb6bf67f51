"""Desk-scale coded-ptychography scenario shared by the benchmarks.

256x256 object built from the bundled street/peppers stand-ins with a 0.2
background, sensor binning r = 4 and K = 8 jittered scan positions.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from cptych import (
    CodedSurface,
    MeasurementSet,
    PerturbationConfig,
    ReconstructionState,
    RunConfig,
    ScenarioConfig,
    SolverConfig,
    default_initial_object,
    make_coded_surface,
    make_ground_truth,
    make_positions,
    perturb_coded_surface,
    run_reconstruction,
    simulate_dataset,
)
from cptych._scenario import default_span


ALGORITHMS = ("epie", "lsq-ml", "pptv")


@dataclass(frozen=True, eq=False)
class Scenario:
    ground_truth: np.ndarray
    true_surface: CodedSurface
    initial_surface: CodedSurface
    measurements: MeasurementSet


def build_scenario(*, perturbed: bool = False, seed: int = 0) -> Scenario:
    cfg = RunConfig(scenario=ScenarioConfig(object_size=(256, 256), num_positions=8, seed=seed))
    sc = cfg.scenario
    gt = make_ground_truth(sc)
    cs = make_coded_surface(sc.object_size, sc.seed, modulus_floor=sc.cs_modulus_floor)
    positions = make_positions(
        sc.num_positions, default_span(sc, cfg.geometry), sc.position_mode, sc.seed + 1
    )
    meas = simulate_dataset(gt, cs, positions, cfg.geometry)
    init_cs = cs
    if perturbed:
        init_cs = perturb_coded_surface(cs, PerturbationConfig(sigma_amp=0.1, sigma_ang=0.3))
    return Scenario(gt, cs, init_cs, meas)


def run_solver(
    scenario: Scenario, cfg: SolverConfig, budget_seconds: float | None = None
) -> tuple[ReconstructionState, float]:
    init = default_initial_object(scenario.measurements, scenario.initial_surface)
    start = time.perf_counter()
    state = run_reconstruction(
        scenario.measurements,
        init,
        scenario.initial_surface,
        cfg,
        scenario.ground_truth,
        budget_seconds=budget_seconds,
    )
    return state, time.perf_counter() - start


def print_table(rows: list[tuple[str, ReconstructionState, float]]) -> None:
    print(f"  {'run':<14} {'iters':>6} {'fidelity':>12} {'objective':>12} {'rmse':>9} {'sec':>7}")
    print("  " + "-" * 65)
    for name, state, seconds in rows:
        final = state.trace.final
        assert final is not None
        print(
            f"  {name:<14} {final.iteration:>6} {final.fidelity:>12.4e} "
            f"{final.objective:>12.4e} {final.rmse or 0.0:>9.4f} {seconds:>7.1f}"
        )
