"""Parallel adaptive clustering: regularized k-means that picks its own k."""

from .core import (
    ClusterSet,
    ClusterSummary,
    EnergyValue,
    InvalidDataError,
    InvalidPartitionError,
    NonFiniteError,
    PacError,
    Partition,
    cluster_stats,
    global_energy,
    summary_apply,
)
from .bench import BenchReport, Scenario, run_benchmark
from .datagen import MixtureSpec, RingSpec, StreamSchedule, gen_concentric_rings, gen_gaussian_mixture
from .grouping import (
    GroupSummary,
    Grouping,
    group_energy,
    group_move_delta,
    group_new_delta,
    regularized_set_kmeans,
)
from .io import DataFormatError, LabeledOutput, read_dataset, write_labels
from .pipeline import (
    PacConfig,
    PacResult,
    lambda_g_from_epsilon,
    lambda_g_time,
    pac_fit,
    split_random,
)
from .refinement import gamma_table, omega_guard, refine, solve_gamma
from .regkmeans import (
    RegKmeansSettings,
    merge_delta,
    point_move_delta,
    point_new_cluster_delta,
    regularized_kmeans,
)
from .streaming import StreamState, state_load, state_save, stream_step

__version__ = "0.1.0"
