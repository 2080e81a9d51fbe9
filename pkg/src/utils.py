"""
Utility functions for logging, checksums and tabular output.
"""

import hashlib
import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Any, Optional

import pandas as pd


LOGGER_NAME = "phononcounts"

# Seed of the run currently being processed; stamped onto log records
_active_run: dict[str, Optional[int]] = {"seed": None}


def setup_logging(level: int = logging.INFO) -> logging.Logger:
    """Set up the package logger with the run-context filter."""
    logger = logging.getLogger(LOGGER_NAME)
    logger.setLevel(level)

    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setLevel(level)
        formatter = logging.Formatter(
            "%(asctime)s - %(name)s - %(levelname)s - [run=%(run)s] %(message)s"
        )
        handler.setFormatter(formatter)
        handler.addFilter(RunContextFilter())
        logger.addHandler(handler)

    return logger


def get_logger(module: str) -> logging.Logger:
    """Child logger for a package module, e.g. get_logger("correlator")."""
    return logging.getLogger(f"{LOGGER_NAME}.{module}")


def set_run_seed(seed: Optional[int]) -> None:
    """Record the seed of the run in progress for log stamping."""
    _active_run["seed"] = seed


class RunContextFilter(logging.Filter):
    """Filter that stamps log records with the active run seed."""

    def filter(self, record: logging.LogRecord) -> bool:
        seed = _active_run["seed"]
        record.run = "-" if seed is None else str(seed)
        return True


def format_timestamp(dt: datetime | None = None) -> str:
    """Format a datetime for manifests."""
    if dt is None:
        dt = datetime.now()
    return dt.strftime("%Y-%m-%d %H:%M:%S")


def sha256_file(path: str | Path, chunk_size: int = 1 << 20) -> str:
    """Hex sha256 of a file, read in chunks."""
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        while True:
            block = handle.read(chunk_size)
            if not block:
                break
            digest.update(block)
    return digest.hexdigest()


def write_table(frame: pd.DataFrame, path_stem: str | Path, fmt: str = "csv") -> Path:
    """
    Write a table as CSV or JSON records.

    Args:
        frame: Table to write
        path_stem: Output path without extension
        fmt: "csv" or "json"

    Returns:
        Path of the written file
    """
    stem = Path(path_stem)
    if fmt == "json":
        path = stem.with_suffix(".json")
        frame.to_json(path, orient="records", indent=2)
    else:
        path = stem.with_suffix(".csv")
        frame.to_csv(path, index=False)
    return path


def write_json(payload: Any, path: str | Path) -> Path:
    """Write a JSON document with sorted keys."""
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str))
    return path
