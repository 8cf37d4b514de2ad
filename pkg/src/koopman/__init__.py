"""Lifted linear modeling of nonlinear dynamics from trajectory data.

The package fits globally linear surrogate models in a space of nonlinear
observables, converts them between discrete and continuous time, and checks
spectral stability, controllability and observability of the result. A CLI
and a small HTTP service expose the same pipeline.
"""

from .analysis import (
    AnalysisReport,
    Spectrum,
    analyze,
    continuous_input_matrix,
    controllability_rank,
    cumulative_error,
    exact_rank,
    generator,
    observability_rank,
    spectrum,
)
from .config import ExperimentConfig, default_config
from .dynamics import (
    GolfParameters,
    InputSignal,
    SystemModel,
    Trajectory,
    derive_seeds,
    generate_training_set,
    get_system,
    pendulum_energy,
    rk4_step,
    sample_initial_conditions,
    simulate,
)
from .edmd import (
    KoopmanModel,
    SnapshotSet,
    assemble,
    fit,
    fit_with_control,
    pinv,
    predict_corrected,
    predict_straight,
)
from .exceptions import (
    DivergenceError,
    FileFormatError,
    IllConditionedError,
    InputError,
    KoopmanError,
    NoPrincipalLogError,
    NumericsError,
    SamplingError,
)
from .fileio import (
    read_model,
    read_trajectory,
    read_trajectory_set,
    write_model,
    write_trajectory,
    write_trajectory_set,
)
from .ingest import IngestSpec, estimate_velocity, ingest_measurements
from .observables import Dictionary, Observable, build_dictionary, parse_expression
from .reproduce import TARGETS, run_reproduction, train_from_config

__version__ = "1.0.0"

__all__ = [
    "AnalysisReport",
    "Spectrum",
    "analyze",
    "continuous_input_matrix",
    "controllability_rank",
    "cumulative_error",
    "exact_rank",
    "generator",
    "observability_rank",
    "spectrum",
    "ExperimentConfig",
    "default_config",
    "GolfParameters",
    "InputSignal",
    "SystemModel",
    "Trajectory",
    "derive_seeds",
    "generate_training_set",
    "get_system",
    "pendulum_energy",
    "rk4_step",
    "sample_initial_conditions",
    "simulate",
    "KoopmanModel",
    "SnapshotSet",
    "assemble",
    "fit",
    "fit_with_control",
    "pinv",
    "predict_corrected",
    "predict_straight",
    "DivergenceError",
    "FileFormatError",
    "IllConditionedError",
    "InputError",
    "KoopmanError",
    "NoPrincipalLogError",
    "NumericsError",
    "SamplingError",
    "read_model",
    "read_trajectory",
    "read_trajectory_set",
    "write_model",
    "write_trajectory",
    "write_trajectory_set",
    "IngestSpec",
    "estimate_velocity",
    "ingest_measurements",
    "Dictionary",
    "Observable",
    "build_dictionary",
    "parse_expression",
    "TARGETS",
    "run_reproduction",
    "train_from_config",
    "__version__",
]
