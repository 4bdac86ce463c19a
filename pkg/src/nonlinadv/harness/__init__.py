"""Datasets, experiment configs, runners, sweeps, reports and the CLI."""

from .config import (
    SCHEMA_VERSION,
    ArchitectureSpec,
    ExperimentConfig,
    LinearizePhaseConfig,
    PhaseConfig,
    config_from_dict,
    desk_config,
    dump_config,
    load_config,
)
from .datasets import Dataset, DatasetSpec, gaussian_blobs, gen_dataset, load_csv, load_idx, spirals, write_idx
from .experiment import run_experiment
from .oracle_check import oracle_check
from .report import emit_report
from .sweep import SWEEP_KINDS, sweep

__all__ = [name for name in dir() if not name.startswith("_")]
