"""Process-level settings for ftseg."""

from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings


class FTSegSettings(BaseSettings):
    """Settings read from the environment and an optional .env file."""

    log_level: str = Field(default="INFO", alias="FTSEG_LOG_LEVEL")
    # Optional JSONL run logging
    log_runs: bool = Field(default=False, alias="FTSEG_LOG_RUNS")
    log_dir: str | Path = Field(default="ftseg-logs", alias="FTSEG_LOG_DIR")
    jobs: int = Field(default=1, ge=1, alias="FTSEG_JOBS")

    model_config = {
        "env_file": ".env",
        "case_sensitive": False,
        "extra": "allow",
        "populate_by_name": True,
    }
