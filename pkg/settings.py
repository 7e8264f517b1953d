# /settings.py
# This file defines the process-level settings for the idiotypic recommender. Experiment parameters
# live in the config file (services/config.py); these are the knobs around it.
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_file=".env", env_file_encoding="utf-8", env_prefix="IDIOREC_", extra="ignore")

    app_name: str = "Idiotypic Recommender"

    # Logging
    log_level: str = "INFO"
    log_format: str = "%(asctime)s %(levelname)s %(name)s: %(message)s"

    # Default vote scale (EachMovie-like 0..5 integer votes)
    min_vote: float = 0.0
    max_vote: float = 5.0
    vote_step: float = 1.0

    # Matching
    match_cache_size: int = 500_000 # user-user matches kept in the LRU cache, shared by all trials of a run.

    # Execution
    max_workers: int = 1 # >1 runs trials on a thread pool; results are joined in trial order either way.

    # Synthetic dataset used by `run --synthetic` / `sweep --synthetic`
    synthetic_users: int = 500
    synthetic_items: int = 300
    synthetic_clusters: int = 5
    synthetic_density: float = 0.2
    synthetic_noise: float = 0.5


settings = Settings()
