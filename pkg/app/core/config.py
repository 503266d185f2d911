"""
Core configuration settings for the Open ASEP Shock Duality Lab.

Uses Pydantic Settings for environment-based configuration management;
every tolerance, size cap and worker count can be overridden from the
environment or a local .env file.
"""

from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings with environment variable support."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore",
    )

    # Application Info
    PROJECT_NAME: str = "Open ASEP Shock Duality Lab"
    VERSION: str = "0.1.0"
    DESCRIPTION: str = (
        "Exact finite-size generators, Bernoulli shock-measure duality checks "
        "and Monte Carlo simulation for the open ASEP"
    )

    # Logging Configuration
    LOG_LEVEL: str = "INFO"

    # Concurrency
    THREADS: int = 1

    # Resource caps
    MEMORY_CAP_MB: int = 1024
    MAX_GENERATOR_SITES: int = 20
    MAX_DUALITY_SITES: int = 14
    DENSE_EIG_CAP: int = 4096

    # Tolerances
    IDENTITY_TOL: float = 1e-12
    MANIFOLD_TOL: float = 1e-10
    DUALITY_TOL: float = 1e-10
    EXPM_TOL: float = 1e-10
    EVOLUTION_TOL: float = 1e-8
    SPECTRAL_TOL: float = 1e-8
    STATIONARITY_TOL: float = 1e-10

    # Monte Carlo
    Z_SCORE_THRESHOLD: float = 4.0
    MC_CHUNK_SIZE: int = 10_000
    DEFAULT_N_TRAJ: int = 100_000
    DEFAULT_SEED: int = 20240229

    # Output
    DEFAULT_OUTPUT_DIR: str = "results"

    @field_validator("THREADS", "MC_CHUNK_SIZE", "DENSE_EIG_CAP", "MEMORY_CAP_MB")
    @classmethod
    def must_be_positive(cls, v: int) -> int:
        """Reject non-positive counts and caps."""
        if v < 1:
            raise ValueError("must be a positive integer")
        return v

    @field_validator("LOG_LEVEL", mode="before")
    @classmethod
    def normalize_log_level(cls, v):
        """Accept log levels in any case."""
        if isinstance(v, str):
            return v.upper()
        return v

    @property
    def memory_cap_bytes(self) -> int:
        """Memory cap for a single dense allocation in bytes."""
        return self.MEMORY_CAP_MB * 1024 * 1024


# Global settings instance
settings = Settings()


def get_settings() -> Settings:
    """Get settings instance - useful for dependency injection."""
    return settings
