"""
Tests for environment-based settings.
"""

import pytest
from pydantic import ValidationError

from app.core.config import Settings, get_settings, settings


class TestSettings:
    """Test cases for the Settings class."""

    def test_defaults(self, monkeypatch):
        """Test documented defaults when the environment is clean."""
        for name in ("THREADS", "LOG_LEVEL", "DUALITY_TOL", "MC_CHUNK_SIZE"):
            monkeypatch.delenv(name, raising=False)
        defaults = Settings(_env_file=None)
        assert defaults.THREADS == 1
        assert defaults.LOG_LEVEL == "INFO"
        assert defaults.DUALITY_TOL == 1e-10
        assert defaults.Z_SCORE_THRESHOLD == 4.0
        assert defaults.MAX_DUALITY_SITES == 14

    def test_environment_overrides(self, monkeypatch):
        """Test that tolerances and caps are read from the environment."""
        monkeypatch.setenv("DUALITY_TOL", "1e-8")
        monkeypatch.setenv("MAX_GENERATOR_SITES", "12")
        monkeypatch.setenv("THREADS", "6")
        overridden = Settings(_env_file=None)
        assert overridden.DUALITY_TOL == 1e-8
        assert overridden.MAX_GENERATOR_SITES == 12
        assert overridden.THREADS == 6

    def test_log_level_normalized(self, monkeypatch):
        monkeypatch.setenv("LOG_LEVEL", "debug")
        assert Settings(_env_file=None).LOG_LEVEL == "DEBUG"

    @pytest.mark.parametrize("name", ["THREADS", "MC_CHUNK_SIZE", "MEMORY_CAP_MB"])
    def test_non_positive_counts_rejected(self, monkeypatch, name):
        monkeypatch.setenv(name, "0")
        with pytest.raises(ValidationError):
            Settings(_env_file=None)

    def test_env_file(self, tmp_path, monkeypatch):
        """Test loading overrides from a .env file."""
        monkeypatch.delenv("Z_SCORE_THRESHOLD", raising=False)
        env_file = tmp_path / ".env"
        env_file.write_text("Z_SCORE_THRESHOLD=5.5\n")
        assert Settings(_env_file=env_file).Z_SCORE_THRESHOLD == 5.5

    def test_memory_cap_bytes(self):
        assert Settings(_env_file=None, MEMORY_CAP_MB=2).memory_cap_bytes == 2 * 1024 * 1024

    def test_get_settings_returns_global(self):
        assert get_settings() is settings
