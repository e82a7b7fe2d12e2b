"""
Runtime Settings
Environment overrides (prefix NETREL_) for output location, worker count and
log level. A .env file in the working directory is honoured.
"""

import os
from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="NETREL_", env_file=".env", extra="ignore")

    out_dir: Optional[str] = Field(default=None, description="Overrides the config's output directory")
    workers: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1)
    log_level: str = "INFO"
    default_out_dir: str = "results"

