"""Configuration, replication runner, validation suite and CLI."""

from .config import SimConfig, load_config, parse_config
from .runner import RunSummary, csv_header, run_experiment
from .validate import ValidationReport, validate

__all__ = ["SimConfig", "load_config", "parse_config", "RunSummary", "csv_header", "run_experiment",
           "ValidationReport", "validate"]
