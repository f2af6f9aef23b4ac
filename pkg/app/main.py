import logging
from fastapi import FastAPI
from app.api.experiments import router as experiments_router
from app.core.config import settings
from app.core.utils import setup_logging

# Logging setup
setup_logging(settings.LOG_LEVEL)
logger = logging.getLogger(__name__)

app = FastAPI(title=settings.API_TITLE, version=settings.API_VERSION)

app.include_router(experiments_router, prefix="/experiments", tags=["Experiments"], include_in_schema=True)

@app.on_event("startup")
async def startup_event():
    logger.info("QKA latent pipeline FastAPI app started.")

@app.get("/health")
def health_check():
    logger.info("Health check endpoint called.")
    return {"status": "ok"}
