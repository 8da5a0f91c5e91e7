"""Numerical campaigns: JSON-configured sweep commands emitting CSV
records, JSON metadata / eigenvector dumps, and SVG plots."""

from .config import ConfigError, RunConfig, load_config
from .records import SCHEMA_VERSION, SweepRecord, make_record, write_records

__all__ = [
    "ConfigError",
    "RunConfig",
    "load_config",
    "SCHEMA_VERSION",
    "SweepRecord",
    "make_record",
    "write_records",
]
