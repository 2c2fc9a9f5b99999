"""
Utility module for the energy-Casimir reduction toolkit.
Contains logging setup, decorators, and CSV/JSON report helpers.
"""

import json
import logging
import time
from functools import wraps
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Sequence

import numpy as np

from config import Config
from errors import EXIT_NUMERICAL, CasimirError


SCHEMA_VERSION = 1

# --- Global Loggers ---
app_logger = logging.getLogger("casimir_reduce")
run_logger = logging.getLogger("casimir_runs")
run_logger.propagate = False


def setup_logging(level: str = "") -> None:
    """Configure logging for the application."""
    log_format = '%(asctime)s - %(levelname)s - %(message)s'
    formatter = logging.Formatter(log_format)

    app_logger.setLevel(getattr(logging, (level or Config.LOG_LEVEL).upper(), logging.INFO))
    if app_logger.hasHandlers():
        app_logger.handlers.clear()

    stream_handler = logging.StreamHandler()
    stream_handler.setFormatter(formatter)
    app_logger.addHandler(stream_handler)

    # Run ledger (one line per finished command)
    run_logger.setLevel(logging.INFO)
    if run_logger.hasHandlers():
        run_logger.handlers.clear()
    if Config.LOG_FILE:
        file_handler = logging.FileHandler(Config.LOG_FILE)
        file_handler.setFormatter(formatter)
        run_logger.addHandler(file_handler)


# --- Decorators ---
def cli_command(func: Callable[..., int]) -> Callable[..., int]:
    """Decorator mapping toolkit errors of a CLI handler to exit codes."""
    @wraps(func)
    def wrapped(*args, **kwargs) -> int:
        started = time.perf_counter()
        name = func.__name__.removesuffix("_command")
        try:
            code = func(*args, **kwargs)
        except CasimirError as e:
            app_logger.error(f"❌ {name} failed - {type(e).__name__}: {e}")
            code = e.exit_code
        except Exception as e:
            app_logger.error(f"❌ {name} crashed - {type(e).__name__}: {e}", exc_info=True)
            code = EXIT_NUMERICAL
        elapsed = time.perf_counter() - started
        run_logger.info(f"{name} exit={code} elapsed={elapsed:.2f}s")
        app_logger.debug(f"{name} finished in {elapsed:.2f}s")
        return code
    return wrapped


def logged_stage(label: str) -> Callable:
    """Decorator that logs entry and duration of a long numerical stage."""
    def decorator(func: Callable) -> Callable:
        @wraps(func)
        def wrapped(*args, **kwargs) -> Any:
            started = time.perf_counter()
            app_logger.debug(f"{label}: started")
            result = func(*args, **kwargs)
            app_logger.debug(f"{label}: done in {time.perf_counter() - started:.3f}s")
            return result
        return wrapped
    return decorator


# --- Report Helpers ---
def _to_builtin(value: Any) -> Any:
    if isinstance(value, Mapping):
        return {str(k): _to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_builtin(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_to_builtin(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def write_json(path: Path, payload: Mapping[str, Any]) -> Path:
    """Write a report as deterministic JSON carrying the schema version."""
    document = {"schema_version": SCHEMA_VERSION, **_to_builtin(payload)}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n")
    return path


def read_json(path: Path) -> Dict[str, Any]:
    return json.loads(Path(path).read_text())


def write_csv(path: Path, columns: Mapping[str, Sequence[float]]) -> Path:
    """Write equal-length columns with a header row; values round-trip exactly."""
    names = list(columns)
    data = np.column_stack([np.asarray(columns[name], dtype=float) for name in names])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = f"# schema_version={SCHEMA_VERSION}\n" + ",".join(names)
    np.savetxt(path, data, delimiter=",", fmt="%.17g", header=header, comments="")
    return path


def read_csv(path: Path) -> Dict[str, np.ndarray]:
    """Read a CSV written by `write_csv` (or any file with one header row)."""
    lines: List[str] = [
        line for line in Path(path).read_text().splitlines()
        if line.strip() and not line.lstrip().startswith("#")
    ]
    if not lines:
        raise ValueError(f"{path}: empty table")
    names = [name.strip() for name in lines[0].split(",")]
    data = np.loadtxt(lines[1:], delimiter=",", ndmin=2) if len(lines) > 1 else np.empty((0, len(names)))
    if data.shape[1] != len(names):
        raise ValueError(f"{path}: header has {len(names)} columns, rows have {data.shape[1]}")
    return {name: data[:, i].copy() for i, name in enumerate(names)}
