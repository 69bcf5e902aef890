"""Experiment orchestration: config, Monte-Carlo batches, outputs."""

from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .experiments import (
    BatchReport,
    GroupSummary,
    SettlingResult,
    monte_carlo,
    sample_initial_conditions,
    settling_time,
    summarize,
)

__all__ = [
    "BatchReport",
    "ConfigError",
    "ExperimentConfig",
    "GroupSummary",
    "SettlingResult",
    "load_config",
    "monte_carlo",
    "parse_config",
    "sample_initial_conditions",
    "settling_time",
    "summarize",
]
