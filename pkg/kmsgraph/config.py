from __future__ import annotations

import os
from dataclasses import dataclass, replace

from kmsgraph.errors import ConfigurationError

AUTO_THREAD_CAP = 4


@dataclass(frozen=True)
class Tolerances:
    critical: float = 1e-9
    support_threshold: float = 1e-4
    eps0: float = 0.5
    grid_depth: int = 30
    extrapolation_tol: float = 1e-10
    max_residual: float = 1e-6

    def __post_init__(self) -> None:
        for name in ("critical", "support_threshold", "eps0", "extrapolation_tol", "max_residual"):
            if not getattr(self, name) > 0.0:
                raise ConfigurationError(f"tolerance '{name}' must be positive")
        if not 1 <= self.grid_depth <= 60:
            raise ConfigurationError("grid_depth must be between 1 and 60")


DEFAULT_TOLERANCES = Tolerances()


@dataclass(frozen=True)
class Settings:
    threads: int
    tolerances: Tolerances

    def override(self, threads: int | None = None, **tolerance_changes: float | int | None) -> Settings:
        changes = {key: value for key, value in tolerance_changes.items() if value is not None}
        return Settings(
            threads=self.threads if threads is None else resolve_threads(threads),
            tolerances=replace(self.tolerances, **changes) if changes else self.tolerances,
        )


def _env_float(name: str, default: float) -> float:
    raw = os.getenv(name, "").strip()
    if not raw:
        return default
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigurationError(f"{name} must be a number") from exc


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name, "").strip()
    if not raw:
        return default
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigurationError(f"{name} must be an integer") from exc


def resolve_threads(requested: int) -> int:
    if requested < 0:
        raise ConfigurationError("KMS_GRAPH_THREADS must be >= 0")
    if requested == 0:
        return max(1, min(AUTO_THREAD_CAP, os.cpu_count() or 1))
    return requested


def get_settings() -> Settings:
    tolerances = Tolerances(
        critical=_env_float("KMS_TOL_CRITICAL", DEFAULT_TOLERANCES.critical),
        support_threshold=_env_float("KMS_SUPPORT_THRESHOLD", DEFAULT_TOLERANCES.support_threshold),
        eps0=_env_float("KMS_EPS0", DEFAULT_TOLERANCES.eps0),
        grid_depth=_env_int("KMS_GRID_DEPTH", DEFAULT_TOLERANCES.grid_depth),
        extrapolation_tol=_env_float("KMS_EXTRAPOLATION_TOL", DEFAULT_TOLERANCES.extrapolation_tol),
        max_residual=_env_float("KMS_MAX_RESIDUAL", DEFAULT_TOLERANCES.max_residual),
    )
    return Settings(threads=resolve_threads(_env_int("KMS_GRAPH_THREADS", 0)), tolerances=tolerances)
