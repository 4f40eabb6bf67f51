"""cptych: coded-ptychography simulation and sparsity-regularized reconstruction."""

from cptych._config import (
    NoNoise,
    OpticalGeometry,
    PerturbationConfig,
    PoissonNoise,
    RunConfig,
    ScenarioConfig,
    SolverConfig,
    TVProxConfig,
    load_config,
)
from cptych._field import (
    FrequencyGrid,
    bin_intensity,
    fft2,
    frequency_grid,
    ifft2,
    propagate,
    shift,
    upsample_adjoint,
)
from cptych._forward import (
    CodedSurface,
    MeasurementSet,
    exit_wave,
    forward_intensity,
    simulate_dataset,
)
from cptych._io import DatasetContainer, read_array, read_dataset, write_array, write_dataset
from cptych._metrics import (
    ConvergenceTrace,
    MetricReport,
    TraceRecord,
    aligned_rmse,
    trace_export,
    trace_import,
)
from cptych._scenario import (
    make_coded_surface,
    make_ground_truth,
    make_positions,
    perturb_coded_surface,
)
from cptych._solvers import (
    EPIEEngine,
    LSQEngine,
    ReconstructionState,
    Reconstructor,
    UpdateEngine,
    default_initial_object,
    epie_update,
    evaluate,
    fidelity_error,
    fidelity_gradient,
    lsq_step_sizes,
    modulus_project,
    objective_value,
    run_reconstruction,
)
from cptych._tv import (
    DualState,
    diff_adjoint,
    diff_forward,
    project_dual,
    tv_prox,
    tv_seminorm,
)
from cptych._types import (
    ComplexField,
    ConfigError,
    ContainerFormatError,
    CptychError,
    DimensionError,
    DivergenceError,
    RealGrid,
    ScanPosition,
)

__all__ = [
    "CodedSurface",
    "ComplexField",
    "ConfigError",
    "ContainerFormatError",
    "ConvergenceTrace",
    "CptychError",
    "DatasetContainer",
    "DimensionError",
    "DivergenceError",
    "DualState",
    "EPIEEngine",
    "FrequencyGrid",
    "LSQEngine",
    "MeasurementSet",
    "MetricReport",
    "NoNoise",
    "OpticalGeometry",
    "PerturbationConfig",
    "PoissonNoise",
    "RealGrid",
    "ReconstructionState",
    "Reconstructor",
    "RunConfig",
    "ScanPosition",
    "ScenarioConfig",
    "SolverConfig",
    "TVProxConfig",
    "TraceRecord",
    "UpdateEngine",
    "aligned_rmse",
    "bin_intensity",
    "default_initial_object",
    "diff_adjoint",
    "diff_forward",
    "epie_update",
    "evaluate",
    "exit_wave",
    "fft2",
    "fidelity_error",
    "fidelity_gradient",
    "forward_intensity",
    "frequency_grid",
    "ifft2",
    "load_config",
    "lsq_step_sizes",
    "make_coded_surface",
    "make_ground_truth",
    "make_positions",
    "modulus_project",
    "objective_value",
    "perturb_coded_surface",
    "project_dual",
    "propagate",
    "read_array",
    "read_dataset",
    "run_reconstruction",
    "shift",
    "simulate_dataset",
    "trace_export",
    "trace_import",
    "tv_prox",
    "tv_seminorm",
    "upsample_adjoint",
    "write_array",
    "write_dataset",
]
