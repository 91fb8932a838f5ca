"""Quench dynamics of long-range spin-1/2 models.

A discrete-sampling semiclassical Monte-Carlo engine (DTWA) for
power-law Ising and XY Hamiltonians, validated against two independent
exact references: closed-form Ising dynamics and state-vector
propagation. Includes light-cone contour extraction and power-law shape
analysis on connected correlation fields, plus a CLI to run and compare
experiments from JSON configs.
"""

__version__ = "0.1.0"

from .analysis import (
    Contour,
    CrossoverRow,
    PowerLawFit,
    bootstrap_eta,
    connected,
    contour_difference,
    eta_crossover,
    evaluate_fit,
    extract_contour,
    fit_power_law,
    monotonic_within_error,
    relative_deviation,
)
from .config import AnalysisOptions, ConfigError, ResolvedRun, load_json, resolve_run_config
from .dtwa import (
    CHUNK_SIZE,
    ChunkSums,
    CorrelationRequest,
    DtwaResult,
    IntegrationError,
    IntegratorControl,
    RunConfig,
    TrajectoryState,
    evolve_ising,
    integrate_xy,
    mean_field,
    run_dtwa,
    sample_initial,
    trajectory_rng,
    xy_derivative,
)
from .lattice import (
    CouplingMatrix,
    LatticeSpec,
    axis_partners,
    build_lattice,
    center_site,
    coupling_matrix,
    effective_coupling,
    site_coords,
    site_index,
)
from .oracle_ed import (
    ConvergenceError,
    EdResult,
    ed_run,
    evolve_ed,
    expect_pair,
    expect_pair_ladder,
    expect_sigma_x,
    expect_sigma_y,
    prepare_plus_x,
)
from .oracle_ising import (
    collective_contrast,
    dtwa_error_prediction,
    ising_connected,
    ising_field,
    ising_magnetization,
    ising_pair,
    ising_series,
)
from .results import (
    CorrelationField,
    ObservableSeries,
    field_from_series,
    field_to_series,
    read_series_csv,
    write_series_csv,
)

__all__ = [
    "__version__",
    # lattice
    "LatticeSpec",
    "CouplingMatrix",
    "build_lattice",
    "site_index",
    "site_coords",
    "center_site",
    "axis_partners",
    "coupling_matrix",
    "effective_coupling",
    # engine
    "CHUNK_SIZE",
    "TrajectoryState",
    "IntegratorControl",
    "CorrelationRequest",
    "RunConfig",
    "ChunkSums",
    "DtwaResult",
    "IntegrationError",
    "trajectory_rng",
    "sample_initial",
    "mean_field",
    "evolve_ising",
    "xy_derivative",
    "integrate_xy",
    "run_dtwa",
    # oracles
    "ising_magnetization",
    "ising_pair",
    "ising_connected",
    "dtwa_error_prediction",
    "collective_contrast",
    "ising_series",
    "ising_field",
    "ConvergenceError",
    "EdResult",
    "prepare_plus_x",
    "evolve_ed",
    "expect_sigma_x",
    "expect_sigma_y",
    "expect_pair",
    "expect_pair_ladder",
    "ed_run",
    # analysis
    "Contour",
    "PowerLawFit",
    "CrossoverRow",
    "connected",
    "extract_contour",
    "fit_power_law",
    "evaluate_fit",
    "contour_difference",
    "eta_crossover",
    "monotonic_within_error",
    "bootstrap_eta",
    "relative_deviation",
    # results and config
    "ObservableSeries",
    "CorrelationField",
    "write_series_csv",
    "read_series_csv",
    "field_to_series",
    "field_from_series",
    "ConfigError",
    "ResolvedRun",
    "AnalysisOptions",
    "load_json",
    "resolve_run_config",
]
