import os

from dotenv import load_dotenv
from pydantic import BaseModel, Field

load_dotenv()


class Settings(BaseModel):
    """Process-level defaults read from the environment."""

    log_level: str = Field(default="INFO")
    output_dir: str = Field(default="results")
    workers: int = Field(default=1, ge=1)
    seed: int = Field(default=0, ge=0)


def get_settings() -> Settings:
    """Get the settings from DELAYGP_* environment variables."""
    return Settings(
        log_level=os.getenv("DELAYGP_LOG_LEVEL", "INFO").upper(),
        output_dir=os.getenv("DELAYGP_OUTPUT_DIR", "results"),
        workers=os.getenv("DELAYGP_WORKERS", 1),
        seed=os.getenv("DELAYGP_SEED", 0),
    )
