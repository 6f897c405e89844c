"""Application configuration from environment variables."""
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    # Application
    APP_NAME: str = "dualfsi"
    APP_VERSION: str = "1.0.0"
    OUTPUT_DIR: str = "output"

    # Numerics
    DENSE_LU_DOF_CAP: int = 600
    GEO_TOL_FACTOR: float = 1e-12
    JAX_ENABLE_X64: bool = True

    # Monitoring
    METRICS_ENABLED: bool = True

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "json"  # json or text

    class Config:
        env_file = ".env"
        case_sensitive = True


settings = Settings()
