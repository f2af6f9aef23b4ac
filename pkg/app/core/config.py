import os
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    API_TITLE: str = os.getenv("API_TITLE", "QKA Latent Pipeline")
    API_VERSION: str = os.getenv("API_VERSION", "1.0.0")
    DEBUG: bool = os.getenv("DEBUG", "false").lower() == "true"
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")
    # Worker threads for statevector preparation; kernel values do not depend on it.
    QKA_NUM_THREADS: int = int(os.getenv("QKA_NUM_THREADS", "1"))
    OUTPUT_ROOT: str = os.getenv("OUTPUT_ROOT", "runs")


settings = Settings()
