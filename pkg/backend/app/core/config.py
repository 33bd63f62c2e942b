"""
Application configuration settings.
"""
from functools import lru_cache
from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, field_validator
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # Application settings
    PROJECT_NAME: str = "regkit"
    ENVIRONMENT: str = "development"  # 'production', 'testing', 'development'
    VERSION: str = "1.0.0"

    # Server settings
    HOST: str = "0.0.0.0"
    PORT: int = 8000
    API_V1_STR: str = "/api/v1"

    # Logging settings
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "json"  # 'json' or 'console'
    LOG_FILE: Optional[str] = None

    # Error tracking
    SENTRY_DSN: Optional[str] = None
    SENTRY_TRACES_SAMPLE_RATE: float = 0.0

    # Feasibility / activity / rank
    TOL_FEAS: float = 1e-7
    TOL_ACT: float = 1e-6
    TOL_RANK: float = 1e-8
    TOL_LP: float = 1e-8
    EPS_POS: float = 1e-6
    DIST_TOL: float = 1e-5
    STATIONARITY_TOL: float = 1e-9
    SUBSET_CAP: int = 12

    # Neighborhood sampling
    RADII: Tuple[float, ...] = (1e-1, 1e-2, 1e-3)
    SAMPLES_PER_RADIUS: int = 200
    SEED: int = 42

    # Inner solvers
    BOX: float = 4.0
    GRID_POINTS: int = 41
    REFINE_LEVELS: int = 3
    RESTARTS: int = 16
    PENALTY_START: float = 10.0
    PENALTY_FACTOR: float = 10.0
    PENALTY_ROUNDS: int = 6
    DEDUP_RADIUS: float = 1e-4
    SOLUTION_VALUE_TOL: float = 1e-6

    # Probe verdict thresholds
    DIVERGENCE_FACTOR: float = 10.0
    DIVERGENCE_ABS: float = 100.0
    CONSISTENT_SPREAD: float = 2.0
    ISC_GAP: float = 0.1

    # Parametric / bilevel
    SLOPE_CAP: float = 1e3
    MAX_GRID_NODES: int = 1_000_000
    KAPPA_GRID: Tuple[float, ...] = (1.0, 10.0, 1e2, 1e3, 1e4)
    DELTA_VIOL: float = 1e-6
    REFINE_ROUNDS: int = 3

    # Parallelism
    WORKERS: int = 1

    class Config:
        case_sensitive = True
        env_prefix = "REGKIT_"
        env_file = ".env"
        env_file_encoding = "utf-8"


class AnalysisConfig(BaseModel):
    """Numerical knobs of one analysis run.

    Every report embeds the tolerance block of the config it was computed with.
    """

    model_config = ConfigDict(frozen=True)

    tol_feas: float = 1e-7
    tol_act: float = 1e-6
    tol_rank: float = 1e-8
    tol_lp: float = 1e-8
    eps_pos: float = 1e-6
    dist_tol: float = 1e-5
    stationarity_tol: float = 1e-9
    subset_cap: int = 12

    radii: Tuple[float, ...] = (1e-1, 1e-2, 1e-3)
    samples_per_radius: int = 200
    seed: int = 42

    box: float = 4.0
    grid_points: int = 41
    refine_levels: int = 3
    restarts: int = 16
    penalty_start: float = 10.0
    penalty_factor: float = 10.0
    penalty_rounds: int = 6
    dedup_radius: float = 1e-4
    solution_value_tol: float = 1e-6

    divergence_factor: float = 10.0
    divergence_abs: float = 100.0
    consistent_spread: float = 2.0
    isc_gap: float = 0.1

    slope_cap: float = 1e3
    max_grid_nodes: int = 1_000_000
    kappa_grid: Tuple[float, ...] = (1.0, 10.0, 1e2, 1e3, 1e4)
    delta_viol: float = 1e-6
    refine_rounds: int = 3

    workers: int = 1

    @field_validator("radii")
    @classmethod
    def radii_descending(cls, v: Tuple[float, ...]) -> Tuple[float, ...]:
        if not v:
            raise ValueError("at least one radius is required")
        if any(r <= 0 for r in v):
            raise ValueError("radii must be strictly positive")
        if any(a <= b for a, b in zip(v, v[1:])):
            raise ValueError("radii must be strictly descending")
        return v

    @field_validator("kappa_grid")
    @classmethod
    def kappa_sorted(cls, v: Tuple[float, ...]) -> Tuple[float, ...]:
        if not v or any(k <= 0 for k in v):
            raise ValueError("kappa grid must hold positive values")
        return tuple(sorted(v))

    @field_validator("workers")
    @classmethod
    def workers_positive(cls, v: int) -> int:
        return max(1, v)

    def tolerance_block(self) -> dict:
        """The block echoed into every report."""
        return self.model_dump(mode="python")

    @classmethod
    def from_settings(cls, source: Settings) -> "AnalysisConfig":
        return cls(
            **{
                name: getattr(source, name.upper())
                for name in cls.model_fields
                if hasattr(source, name.upper())
            }
        )


@lru_cache()
def get_settings() -> Settings:
    return Settings()


def get_analysis_config(**overrides) -> AnalysisConfig:
    """Snapshot the current settings, applying per-run overrides."""
    base = AnalysisConfig.from_settings(settings)
    if overrides:
        clean = {k: v for k, v in overrides.items() if v is not None}
        return AnalysisConfig(**{**base.model_dump(), **clean})
    return base


# Global settings instance
settings = get_settings()
