"""Pydantic request/response models for the bound-computation service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class ExperimentPayload(BaseModel):
    """Wire form of an experiment configuration (see README for semantics)."""

    dimension: int = Field(ge=1)
    generator: str
    seed: int
    mu: list[float] | None = None
    sigma: list[list[float]] | None = None
    nu: float | None = None
    shape: float | None = None
    constraint: str = "trace"
    interest: str = "mu"
    M: int = Field(default=10_000, ge=1)
    R: int = Field(default=100, ge=2)
    schedule: list[int] = [2, 4, 8]
    family: str = "poly-log-t"
    estimators: list[str] = ["mean"]
    huber_q: float = 0.9
    student_t_nu: float = 4.0
    rtol: float = 1e-3


class RunRequest(BaseModel):
    config: ExperimentPayload
    threads: int = Field(default=1, ge=1, le=64)


class RunResponse(BaseModel):
    files: dict[str, str]
    summary: dict
    config_hash: str
    degenerate: bool = False


class ErrorBody(BaseModel):
    error_kind: str  # "config" | "degenerate" | "integrity"
    detail: str


class HealthResponse(BaseModel):
    status: str
    version: str


class CatalogResponse(BaseModel):
    generators: list[dict]
    constraints: list[str]
    families: list[str]
    estimators: list[str]
