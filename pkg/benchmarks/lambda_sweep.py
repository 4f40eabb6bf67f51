"""Final RMSE of PPTV across TV weights on the desk-scale scenario.

Usage:
    uv run python benchmarks/lambda_sweep.py
"""

from __future__ import annotations

import sys
from pathlib import Path

# Ensure the repo root is on sys.path so both ``cptych`` and
# ``benchmarks`` are importable when running as a script.
_root = str(Path(__file__).resolve().parent.parent)
sys.path.insert(0, _root + "/src")
sys.path.insert(0, _root)

from cptych import SolverConfig, TVProxConfig

from benchmarks._scenarios import build_scenario, run_solver

LAMBDAS = [0.0, 1e-4, 3e-4, 1e-3, 3e-3, 1e-2]
OUTER_ITERS = 30


def main() -> None:
    scenario = build_scenario()
    print(f"  {'lambda':>8} {'objective':>12} {'rmse':>9} {'sec':>7}")
    print("  " + "-" * 40)
    best = None
    for lam in LAMBDAS:
        cfg = SolverConfig(algorithm="pptv", outer_iters=OUTER_ITERS, tv=TVProxConfig(lam=lam))
        state, seconds = run_solver(scenario, cfg)
        final = state.trace.final
        assert final is not None and final.rmse is not None
        print(f"  {lam:>8.0e} {final.objective:>12.4e} {final.rmse:>9.4f} {seconds:>7.1f}")
        if best is None or final.rmse < best[1]:
            best = (lam, final.rmse)
    assert best is not None
    print()
    print(f"Lowest RMSE at lambda = {best[0]:g}")


if __name__ == "__main__":
    main()
