"""Experiment runner: configs, datasets, artifacts and subcommands."""

from .config import SCHEMA, TASKS, ConfigError, load_config, validate_config
from .datasets import CsvFormatError, Dataset, generate_dataset, load_csv, save_csv
from .io import (CHECKPOINT_VERSION, CheckpointError, checkpoint_load, checkpoint_save, load_metrics,
                 save_metrics, save_result)
from .main import execute, main

__all__ = [
    "SCHEMA", "TASKS", "ConfigError", "load_config", "validate_config", "CsvFormatError", "Dataset",
    "generate_dataset", "load_csv", "save_csv", "CHECKPOINT_VERSION", "CheckpointError",
    "checkpoint_load", "checkpoint_save", "load_metrics", "save_metrics", "save_result", "execute",
    "main", "run_experiment",
]


def run_experiment(config: dict, out, command: str = "train") -> dict:
    """Validate an in-memory config and run it, writing artifacts to ``out``."""
    from pathlib import Path

    return execute(command, validate_config(config), Path(out))
