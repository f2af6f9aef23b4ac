import logging
from pathlib import Path

from fastapi import APIRouter, HTTPException, Request
from fastapi.concurrency import run_in_threadpool

from app.core.config import settings
from app.core.errors import ConfigError, DataError, QkaError, StageError
from app.core.utils import slugify
from app.pipeline.runner import ExperimentRunner
from app.pipeline.schemas import ExperimentConfig
from app.services.artifact_service import ArtifactService

logger = logging.getLogger(__name__)

router = APIRouter()


def _status_for(exc):
    cause = exc.cause if isinstance(exc, StageError) else exc
    return 422 if isinstance(cause, (ConfigError, DataError)) else 500


def _run_dir(name):
    run_name = slugify(str(name or ""))
    if not run_name:
        raise HTTPException(status_code=422, detail="run name must contain letters or digits")
    return run_name, Path(settings.OUTPUT_ROOT) / run_name


@router.post("/run")
async def run_experiment(request: Request):
    payload = await request.json()
    logger.info(f"Received experiment request: {payload.get('name')}")
    run_name, output_dir = _run_dir(payload.get("name"))
    try:
        config = ExperimentConfig.build(payload.get("config") or {}, output_dir=str(output_dir))
        runner = ExperimentRunner(config, ArtifactService(output_dir))
        report = await run_in_threadpool(runner.run)
        logger.info(f"Experiment '{run_name}' completed")
        return {"run_name": run_name, "report": report.model_dump(mode="json")}
    except QkaError as e:
        logger.error(f"Experiment '{run_name}' failed: {e}", exc_info=True)
        raise HTTPException(status_code=_status_for(e), detail=str(e))


@router.get("/{run_name}/report")
def get_report(run_name: str):
    run_name, output_dir = _run_dir(run_name)
    try:
        return ArtifactService.load_report(output_dir)
    except DataError as e:
        raise HTTPException(status_code=404, detail=str(e))
