"""PPTV vs. ePIE vs. LSQ-ML with a known coded surface.

Each solver gets the same wall-clock budget on the desk-scale scenario.
Reports final fidelity, objective and aligned RMSE, then checks:
- PPTV final RMSE is at most half the better baseline's
- PPTV objective and ePIE fidelity both drop from iteration 1 to the end

Usage:
    uv run python benchmarks/known_surface.py
"""

from __future__ import annotations

import sys
from pathlib import Path

# Ensure the repo root is on sys.path so both ``cptych`` and
# ``benchmarks`` are importable when running as a script.
_root = str(Path(__file__).resolve().parent.parent)
sys.path.insert(0, _root + "/src")
sys.path.insert(0, _root)

from cptych import SolverConfig

from benchmarks._scenarios import ALGORITHMS, build_scenario, print_table, run_solver

BUDGET_SECONDS = 60.0


def main() -> None:
    scenario = build_scenario()
    print(f"Object : {scenario.ground_truth.shape}, K = {len(scenario.measurements)}")
    print(f"Budget : {BUDGET_SECONDS:.0f} s per solver")
    print()

    results = {}
    for algorithm in ALGORITHMS:
        cfg = SolverConfig(algorithm=algorithm, outer_iters=10_000)
        results[algorithm] = run_solver(scenario, cfg, BUDGET_SECONDS)

    print_table([(name, state, sec) for name, (state, sec) in results.items()])
    print()

    def final_rmse(name: str) -> float:
        final = results[name][0].trace.final
        assert final is not None and final.rmse is not None
        return final.rmse

    pptv_trace = results["pptv"][0].trace
    epie_trace = results["epie"][0].trace
    checks = [
        (
            "PPTV rmse <= 0.5 x best baseline",
            final_rmse("pptv") <= 0.5 * min(final_rmse("epie"), final_rmse("lsq-ml")),
        ),
        ("PPTV objective decreases", pptv_trace[-1].objective < pptv_trace[0].objective),
        ("ePIE fidelity decreases", epie_trace[-1].fidelity < epie_trace[0].fidelity),
    ]
    for label, ok in checks:
        print(f"  {'PASS' if ok else 'FAIL'}  {label}")


if __name__ == "__main__":
    main()
