import os
from functools import lru_cache

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_file=".env", env_prefix="KACZLAB_")

    # Overrides [run] output_dir of every experiment config when non-empty.
    output_dir: str = os.getenv("KACZLAB_OUTPUT_DIR", "")
    log_level: str = os.getenv("KACZLAB_LOG_LEVEL", "INFO")
    # Upper bound on iterations between two clock reads inside the solver loop.
    default_eval_chunk: int = int(os.getenv("KACZLAB_DEFAULT_EVAL_CHUNK", "256"))

    def model_post_init(self, __context):
        self.log_level = self.log_level.upper()
        if self.default_eval_chunk < 1:
            self.default_eval_chunk = 1


@lru_cache
def get_settings() -> Settings:
    return Settings()
