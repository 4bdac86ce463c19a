"""Path-length statistics of the nonlinear skeleton of a network."""

from .dag import (
    ACTIVATION,
    PASSTHROUGH,
    ComputationDag,
    DagNode,
    MergeAnnotation,
    chain_dag,
    layered_dag,
    resblock_chain_dag,
    validate_dag,
)
from .histogram import (
    MODES,
    NORMALIZED,
    UNNORMALIZED,
    ActivationMask,
    PathHistogram,
    active_fraction,
    apl,
    dag_apl,
    dag_napl,
    enw,
    max_effective_depth,
    propagate_histograms,
    sink_histogram,
)
from .io import dag_from_dict, dag_to_dict, load_dag, save_dag
from .oracle import brute_force_histogram, count_paths_dfs, enumerate_paths
from .random_dags import random_dag, random_series_parallel_dag

__all__ = [name for name in dir() if not name.startswith("_")]
