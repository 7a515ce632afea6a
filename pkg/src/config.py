import logging
import os

from dotenv import load_dotenv
from pydantic import Field, field_validator
from pydantic_settings import BaseSettings

load_dotenv()

logger = logging.getLogger(__name__)

_LOG_LEVELS = {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}


class Settings(BaseSettings):
    """Numerical defaults and runtime options loaded from environment variables."""

    # Application Configuration
    LOG_LEVEL: str = Field(default="INFO", description="Logging level")
    REPORT_DIR: str = Field(
        default="reports", description="Directory for generated reports"
    )
    SPREADLAB_THREADS: int = Field(
        default=4, description="Cap on worker threads for seed sweeps and enumeration"
    )

    # Linear algebra
    ORTHO_RANK_TOL: float = Field(
        default=1e-10,
        description="Relative pivot threshold below which a column counts as dependent",
    )
    EIGEN_TOL: float = Field(
        default=1e-8, description="Relative residual tolerance of the eigen-solver"
    )
    EIGEN_MAX_ITER: int = Field(
        default=10000, description="Iteration cap of the eigen-solver"
    )
    EIGEN_RESTARTS: int = Field(
        default=3, description="Independent random starts of the eigen-solver"
    )
    DENSE_EIGEN_CUTOFF: int = Field(
        default=32, description="Operators up to this dimension are solved densely"
    )

    # Spreadness
    SPREAD_ENUMERATION_CAP: int = Field(
        default=2_000_000, description="Maximum subsets enumerated by exact checks"
    )
    WITNESS_RESTARTS: int = Field(
        default=20, description="Random restarts of the witness search"
    )
    WITNESS_MAX_ITER: int = Field(
        default=1000, description="Alternating steps per witness-search restart"
    )
    DISTORTION_RESTARTS: int = Field(
        default=30, description="Random restarts of the distortion ascent"
    )

    # Certification
    CERTIFY_THRESHOLD: float = Field(
        default=2.0, description="Distortion threshold C' of the YES/NO certificate"
    )
    CERTIFY_INFLATION_MULTIPLIER: float = Field(
        default=10.0, description="Certificate inflation as a multiple of EIGEN_TOL"
    )

    # Instances
    INSTANCE_SCREEN_ATTEMPTS: int = Field(
        default=10, description="Resampling cap of the Rademacher spreadness screen"
    )
    INSTANCE_SPREAD_FRACTION: float = Field(
        default=0.05, description="Screen subset budget as a fraction of rows"
    )
    INSTANCE_SPREAD_DELTA: float = Field(
        default=0.9, description="Screen spreadness threshold"
    )

    # Noise
    KL_SERIES_TAIL: float = Field(
        default=1e-15, description="Tail mass at which the KL series is truncated"
    )
    KL_SERIES_MAX_TERMS: int = Field(
        default=200_000, description="Explicit terms of the KL series before the tail"
    )
    KL_MATCH_TOL: float = Field(
        default=1e-9, description="Allowed closed-form vs series KL disagreement"
    )

    # Low-degree
    LOWDEG_MAX_DEGREE: int = Field(
        default=128, description="Largest degree D accepted by the low-degree norm"
    )
    LOWDEG_LOG_DOMAIN_DEGREE: int = Field(
        default=30, description="Hermite degrees above this use the log domain"
    )

    # Regression
    HUBER_MAX_ITERS: int = Field(default=200, description="IRLS iteration cap")
    HUBER_TOL: float = Field(default=1e-10, description="IRLS step tolerance")
    HARDNESS_TUNING_FRACTION: float = Field(
        default=1e-3,
        description="Huber tuning in hardness runs as a fraction of the amplitude",
    )

    # Spark
    SPARK_COLUMN_CAP: int = Field(
        default=22, description="Maximum column count for exact spark"
    )

    @field_validator("LOG_LEVEL", mode="before")
    @classmethod
    def normalize_log_level(cls, v):
        level = str(v).strip().upper()
        if level not in _LOG_LEVELS:
            raise ValueError(f"Unsupported log level: {v}")
        return level

    @field_validator("SPREADLAB_THREADS")
    @classmethod
    def positive_threads(cls, v):
        if v < 1:
            raise ValueError("SPREADLAB_THREADS must be at least 1")
        return v

    model_config = {
        "env_file": ".env",
        "env_file_encoding": "utf-8",
        "case_sensitive": True,
        "extra": "ignore",
    }


# Global settings instance
settings = Settings()


def configure_logging(level: str = None) -> None:
    """
    Configure the root logger once for command-line use.

    Args:
        level: Level name overriding settings.LOG_LEVEL
    """
    logging.basicConfig(
        level=(level or settings.LOG_LEVEL).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def validate_config() -> bool:
    """
    Validate the current configuration.

    Returns:
        True if configuration is valid, False otherwise
    """
    try:
        tolerances = {
            "ORTHO_RANK_TOL": settings.ORTHO_RANK_TOL,
            "EIGEN_TOL": settings.EIGEN_TOL,
            "KL_SERIES_TAIL": settings.KL_SERIES_TAIL,
            "KL_MATCH_TOL": settings.KL_MATCH_TOL,
            "HUBER_TOL": settings.HUBER_TOL,
        }
        for name, value in tolerances.items():
            if not value > 0:
                logger.error("%s must be positive, got %s", name, value)
                return False

        if settings.CERTIFY_THRESHOLD <= 1:
            logger.error("CERTIFY_THRESHOLD must exceed 1")
            return False

        directory = settings.REPORT_DIR
        if not os.path.exists(directory):
            try:
                os.makedirs(directory, exist_ok=True)
            except OSError as e:
                logger.error("Cannot create directory %s: %s", directory, e)
                return False
        elif not os.access(directory, os.W_OK):
            logger.error("Directory %s is not writable", directory)
            return False

        return True

    except Exception as e:
        logger.error("Configuration validation error: %s", e)
        return False
