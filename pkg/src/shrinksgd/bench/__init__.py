"""Benchmark harness: configuration, experiment drivers and the CLI."""

from .config import ExperimentConfig
from .runner import cmd_compare, cmd_run, cmd_sweep

__all__ = ["ExperimentConfig", "cmd_run", "cmd_sweep", "cmd_compare"]
