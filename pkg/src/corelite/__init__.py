"""Benchmark-lite toolkit: coreset selection, contamination scanning, score aggregation."""

__version__ = "0.1.0"


class CoreliteError(Exception):
    """Data or content error (CLI exit code 1)."""
