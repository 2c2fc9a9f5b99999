"""
Configuration module for the energy-Casimir reduction toolkit.

Environment-level defaults live on `Config`; per-run model files are parsed
into a `ModelConfig`.
"""

import os
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Optional

from dotenv import load_dotenv

from errors import ConfigError

load_dotenv()


class Config:
    # --- Grids ---
    GRID_NODES: int = int(os.environ.get("CASIMIR_GRID_NODES", "2000"))
    TABLE_NODES: int = int(os.environ.get("CASIMIR_TABLE_NODES", "400"))
    TABLE_MIN: float = float(os.environ.get("CASIMIR_TABLE_MIN", "1e-8"))
    TABLE_MAX: float = float(os.environ.get("CASIMIR_TABLE_MAX", "1e4"))

    # --- Tolerances ---
    QUAD_TOL: float = float(os.environ.get("CASIMIR_QUAD_TOL", "1e-11"))
    ODE_RTOL: float = float(os.environ.get("CASIMIR_ODE_RTOL", "1e-11"))
    FIXED_POINT_TOL: float = float(os.environ.get("CASIMIR_FIXED_POINT_TOL", "1e-9"))
    MAX_ITERATIONS: int = int(os.environ.get("CASIMIR_MAX_ITERATIONS", "20000"))

    # --- Logging ---
    LOG_LEVEL: str = os.environ.get("CASIMIR_LOG_LEVEL", "INFO")
    LOG_FILE: str = os.environ.get("CASIMIR_LOG_FILE", "")

    # --- Sweeps ---
    SWEEP_WORKERS: int = int(os.environ.get("CASIMIR_SWEEP_WORKERS", "4"))

    @classmethod
    def validate(cls) -> bool:
        """Validate environment configuration on startup."""
        problems = []
        if cls.GRID_NODES < 10:
            problems.append(f"CASIMIR_GRID_NODES must be >= 10. Got: {cls.GRID_NODES}")
        if cls.TABLE_NODES < 10:
            problems.append(f"CASIMIR_TABLE_NODES must be >= 10. Got: {cls.TABLE_NODES}")
        if not 0 < cls.TABLE_MIN < cls.TABLE_MAX:
            problems.append(
                f"CASIMIR_TABLE_MIN/MAX must satisfy 0 < min < max. Got: {cls.TABLE_MIN}, {cls.TABLE_MAX}"
            )
        for name in ("QUAD_TOL", "ODE_RTOL", "FIXED_POINT_TOL"):
            if getattr(cls, name) <= 0:
                problems.append(f"CASIMIR_{name} must be positive. Got: {getattr(cls, name)}")
        if cls.SWEEP_WORKERS < 1:
            problems.append(f"CASIMIR_SWEEP_WORKERS must be >= 1. Got: {cls.SWEEP_WORKERS}")
        if problems:
            for problem in problems:
                print(f"FATAL: {problem}")
            return False
        return True


# --- Model Configuration ---
@dataclass(frozen=True)
class ModelSpec:
    """A `polytrope(x)` or `table(path)` entry of a model file."""
    kind: str
    parameter: Optional[float] = None
    path: Optional[str] = None

    def describe(self) -> str:
        if self.kind == "polytrope":
            return f"polytrope({self.parameter:g})"
        return f"table({self.path})"


@dataclass(frozen=True)
class ModelConfig:
    q: Optional[ModelSpec] = None
    phi: Optional[ModelSpec] = None
    mass: float = 1.0
    grid_nodes: int = field(default_factory=lambda: Config.GRID_NODES)
    truncation: Optional[float] = None
    tol_quad: float = field(default_factory=lambda: Config.QUAD_TOL)
    tol_ode: float = field(default_factory=lambda: Config.ODE_RTOL)
    tol_fixed_point: float = field(default_factory=lambda: Config.FIXED_POINT_TOL)
    exterior: Optional[str] = None

    def validate(self) -> "ModelConfig":
        """Check the ModelConfig invariants; returns self for chaining."""
        if (self.q is None) == (self.phi is None):
            raise ConfigError("exactly one of 'q' or 'phi' must be given")
        if not self.mass > 0:
            raise ConfigError(f"mass must be positive, got {self.mass}")
        if self.grid_nodes < 10:
            raise ConfigError(f"grid_nodes must be >= 10, got {self.grid_nodes}")
        if self.truncation is not None and not self.truncation > 0:
            raise ConfigError(f"truncation must be positive, got {self.truncation}")
        for name in ("tol_quad", "tol_ode", "tol_fixed_point"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.phi is not None and self.phi.kind == "polytrope":
            if not 0 < self.phi.parameter < 3:
                raise ConfigError(f"phi = polytrope(n) needs 0 < n < 3, got n={self.phi.parameter}")
        if self.q is not None and self.q.kind == "polytrope" and not self.q.parameter > 0:
            raise ConfigError(f"q = polytrope(k) needs k > 0, got k={self.q.parameter}")
        return self


_LINE_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*?)\s*$")
_SPEC_RE = re.compile(r"^(polytrope|table)\(\s*([^)]*?)\s*\)$")
_FLOAT_KEYS = ("mass", "truncation", "tol_quad", "tol_ode", "tol_fixed_point")


def parse_model_spec(text: str, line: Optional[int] = None) -> ModelSpec:
    """Parse `polytrope(1.5)` or `table(path.csv)`."""
    match = _SPEC_RE.match(text.strip())
    if not match:
        raise ConfigError(f"expected polytrope(x) or table(path), got '{text}'", line)
    kind, argument = match.groups()
    if kind == "table":
        if not argument:
            raise ConfigError("table() needs a path", line)
        return ModelSpec(kind="table", path=argument)
    try:
        return ModelSpec(kind="polytrope", parameter=float(argument))
    except ValueError:
        raise ConfigError(f"polytrope() needs a number, got '{argument}'", line)


def parse_model_text(text: str, base_dir: Optional[Path] = None) -> ModelConfig:
    """Parse the flat key-value model format."""
    values: Dict[str, object] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        content = raw.split("#", 1)[0]
        if not content.strip():
            continue
        match = _LINE_RE.match(content)
        if not match:
            raise ConfigError(f"expected 'key = value', got '{raw.strip()}'", number)
        key, value = match.groups()
        if key in values:
            raise ConfigError(f"duplicate key '{key}'", number)
        if key in ("q", "phi"):
            spec = parse_model_spec(value, number)
            if spec.kind == "table" and base_dir is not None:
                spec = replace(spec, path=str((base_dir / spec.path).resolve()))
            values[key] = spec
        elif key in _FLOAT_KEYS:
            try:
                values[key] = float(value)
            except ValueError:
                raise ConfigError(f"'{key}' needs a number, got '{value}'", number)
        elif key == "grid_nodes":
            try:
                values[key] = int(value)
            except ValueError:
                raise ConfigError(f"'grid_nodes' needs an integer, got '{value}'", number)
        elif key == "exterior":
            path = Path(value)
            if base_dir is not None and not path.is_absolute():
                path = (base_dir / path).resolve()
            values[key] = str(path)
        else:
            raise ConfigError(f"unknown key '{key}'", number)
    return ModelConfig(**values)


def load_model_config(path: str) -> ModelConfig:
    """Read a model file from disk (unvalidated; call apply_overrides next)."""
    file_path = Path(path)
    if not file_path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_model_text(file_path.read_text(), base_dir=file_path.parent)


def apply_overrides(
    model: ModelConfig,
    mass: Optional[float] = None,
    k: Optional[float] = None,
    n: Optional[float] = None,
    grid_nodes: Optional[int] = None,
    tol: Optional[float] = None,
) -> ModelConfig:
    """Apply CLI flag overrides and validate the result."""
    changes: Dict[str, object] = {}
    if mass is not None:
        changes["mass"] = mass
    if k is not None:
        changes["q"] = ModelSpec(kind="polytrope", parameter=k)
        changes["phi"] = None
    if n is not None:
        if k is not None:
            raise ConfigError("--k and --n are mutually exclusive")
        changes["phi"] = ModelSpec(kind="polytrope", parameter=n)
        changes["q"] = None
    if grid_nodes is not None:
        changes["grid_nodes"] = grid_nodes
    if tol is not None:
        changes["tol_fixed_point"] = tol
    return replace(model, **changes).validate()
