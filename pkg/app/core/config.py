from pydantic_settings import BaseSettings
from typing import Optional


class Settings(BaseSettings):
    # Application settings
    app_name: str = "EIG Early-Stopping Agreement Simulator"
    app_version: str = "1.0.0"
    debug: bool = False
    log_level: str = "INFO"

    # Trace settings
    trace_schema_version: int = 1
    record_messages: bool = True

    # Protocol knobs
    # Re-mask prior-round IT entries when a process newly enters F
    retroactive_masking: bool = False

    # Message budget B(n) = budget_coefficient * n ** budget_degree bits per correct process
    budget_coefficient: float = 1.0
    budget_degree: int = 10
    enforce_budget: bool = False

    # Exhaustive oracle settings
    oracle_branch_cap: int = 250_000
    oracle_spot_check_rate: float = 0.01
    oracle_seed: int = 7

    # Batch settings
    workers: int = 1

    # Optional default config file picked up by the CLI when --config is omitted
    default_config: Optional[str] = None

    class Config:
        env_file = ".env"
        env_prefix = "EIGSIM_"


settings = Settings()
