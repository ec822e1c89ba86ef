"""FastAPI service wrapping the bound-computation library.

Each experiment endpoint takes the canonical config payload, runs the
corresponding pipeline, and returns the output CSVs as strings so clients
(including the bundled CLI) write byte-identical files.  Library errors are
mapped to stable ``error_kind`` values: "config" for invalid requests,
"degenerate" for numerical degeneracies, "integrity" for violated
construction invariants.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..config import config_from_payload
from ..errors import (
    ConfigError,
    EllboundsError,
    IntegrityError,
    ModelError,
    ScheduleError,
    ShapeError,
)
from ..estimators import ESTIMATOR_IDS
from ..model import CONSTRAINTS
from ..runner import RUNNERS
from ..semiparam import TILT_FAMILIES
from .schemas import CatalogResponse, HealthResponse, RunRequest, RunResponse

__all__ = ["create_app", "classify_error"]


def classify_error(exc: EllboundsError) -> tuple[int, str]:
    """(HTTP status, error_kind) for a library exception."""
    if isinstance(exc, (ConfigError, ScheduleError, ModelError, ShapeError)):
        return 400, "config"
    if isinstance(exc, IntegrityError):
        return 500, "integrity"
    return 422, "degenerate"


def create_app() -> FastAPI:
    app = FastAPI(title="ellbounds", version=__version__)

    @app.exception_handler(EllboundsError)
    async def _handle(request: Request, exc: EllboundsError) -> JSONResponse:
        status, kind = classify_error(exc)
        return JSONResponse(
            status_code=status,
            content={"error_kind": kind, "detail": f"{type(exc).__name__}: {exc}"},
        )

    @app.get("/v1/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.get("/v1/catalog", response_model=CatalogResponse)
    def catalog() -> CatalogResponse:
        return CatalogResponse(
            generators=[
                {"kind": "gaussian", "param": None},
                {"kind": "student-t", "param": "nu > 2"},
                {"kind": "gen-gaussian", "param": "shape s > 0"},
            ],
            constraints=list(CONSTRAINTS),
            families=list(TILT_FAMILIES),
            estimators=list(ESTIMATOR_IDS),
        )

    def _run(command: str, req: RunRequest) -> RunResponse:
        cfg = config_from_payload(req.config.model_dump(exclude_none=True))
        result = RUNNERS[command](cfg, threads=req.threads)
        return RunResponse(
            files=result.files,
            summary=result.summary,
            config_hash=result.config_hash,
            degenerate=result.degenerate,
        )

    @app.post("/v1/sample", response_model=RunResponse)
    def sample(req: RunRequest) -> RunResponse:
        return _run("sample", req)

    @app.post("/v1/crb", response_model=RunResponse)
    def crb(req: RunRequest) -> RunResponse:
        return _run("crb", req)

    @app.post("/v1/scrb", response_model=RunResponse)
    def scrb(req: RunRequest) -> RunResponse:
        return _run("scrb", req)

    @app.post("/v1/bench", response_model=RunResponse)
    def bench(req: RunRequest) -> RunResponse:
        return _run("bench", req)

    return app
