from pydantic_settings import BaseSettings, SettingsConfigDict
from functools import lru_cache
from pathlib import Path


class Settings(BaseSettings):
    APP_NAME: str = "fraclab"
    VERSION: str = "1.0.0"
    BASE_DIR: Path = Path(__file__).resolve().parent.parent.parent
    TEMPLATES_DIR: Path = BASE_DIR / "fraclab" / "templates"
    OUTPUT_DIR: Path = BASE_DIR / "artifacts"
    CONSTANTS_LEDGER: Path = BASE_DIR / "artifacts" / "constants.json"
    DEBUG: bool = False
    LOG_LEVEL: str = "INFO"
    WORKERS: int = 4

    # Quadrature
    QUAD_EPSABS: float = 1e-8
    QUAD_EPSREL: float = 1e-6
    QUAD_LIMIT: int = 200
    FAR_FIELD_FACTOR: float = 8.0

    # Dirichlet kernel
    T_PRIME_CEILING: float = 1e3
    EXTRAPOLATION_SPREAD: float = 0.1

    # Criteria search
    SIGMA_PER_DECADE: int = 8
    SIGMA_DECADES: int = 6
    CENTERS_PER_COMPONENT: int = 64

    # Picard solver
    PICARD_MAX_ITER: int = 60
    PICARD_TOL: float = 1e-6
    OVERFLOW_CEILING: float = 1e12
    TIME_RATIO: float = 2 ** 0.25
    TIME_FLOOR: float = 1e-4
    T_SCHEDULE_LENGTH: int = 6

    model_config = SettingsConfigDict(env_file=".env", env_prefix="FRACLAB_", extra="ignore")


@lru_cache()
def get_settings() -> Settings:
    return Settings()
