"""Experiment configuration, orchestration, outputs and the CLI."""

from .config import (EXPERIMENTS, METHODS, ExperimentConfig, default_config, emit_config, load_config,
                     paper_scale, parse_config, save_config)
from .experiments import (ExperimentRecord, assign_training_lengths, emit_plot_data, read_records_csv,
                          records_csv, reward_threshold, run_experiment, samples_to_threshold, summarize,
                          write_outputs)
from .pipeline import Artifacts, MappedSourcePolicy, run_method, train_source

__all__ = [
    "EXPERIMENTS",
    "METHODS",
    "ExperimentConfig",
    "default_config",
    "emit_config",
    "parse_config",
    "load_config",
    "save_config",
    "paper_scale",
    "ExperimentRecord",
    "run_experiment",
    "records_csv",
    "read_records_csv",
    "summarize",
    "emit_plot_data",
    "write_outputs",
    "reward_threshold",
    "samples_to_threshold",
    "assign_training_lengths",
    "Artifacts",
    "MappedSourcePolicy",
    "run_method",
    "train_source",
]
