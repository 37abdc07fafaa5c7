"""HTTP service wrapping the core package.

Three POST endpoints mirror the command-line verbs: /validate, /sample,
/experiment, plus GET /health.  Request and response shapes are pydantic
models; semantic configuration problems surface as 422 with a message
naming the offending key, numerical failures as 500.  Experiments run
synchronously in the request; long ladders mean long requests, so clients
should not set read timeouts.
"""

from __future__ import annotations

from typing import Literal

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict, Field

from . import __version__
from .experiment import ExperimentConfig, run_experiment
from .flow import FlowSolverError, PrecisionError
from .limitlaw import LimitLaw, sample_initial_conditions, sample_limit
from .models import builtin_model, validate_model
from .sde import SimulationError, exact_feller_endpoint

__all__ = ["create_app"]

SAMPLE_TARGETS = ("w", "x0", "feller_endpoint")
_MAX_SAMPLES = 2_000_000


class ValidateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid", protected_namespaces=())

    model: str
    a: float
    grid_size: int = Field(default=512, ge=2, le=100_000)


class ValidateResponse(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    model: str
    ok: bool
    violations: list[str]
    grid_size: int
    grid_upper: float


class SampleRequest(BaseModel):
    model_config = ConfigDict(extra="forbid", protected_namespaces=())

    target: Literal["w", "x0", "feller_endpoint"]
    a: float
    b: float = 1.0
    model: str | None = None
    t: float | None = None
    n: int = Field(default=10_000, ge=1, le=_MAX_SAMPLES)
    seed: int = Field(default=0, ge=0, lt=2**64)


class SampleResponse(BaseModel):
    target: str
    n: int
    seed: int
    samples: list[float]


class MetricRowModel(BaseModel):
    experiment: str
    epsilon: float | None
    metric: str
    value: float
    stderr: float | None
    n: int


class ExperimentResponse(BaseModel):
    experiment: str
    config: dict
    config_hash: str
    passed: bool
    verdicts: dict[str, bool]
    metrics: list[MetricRowModel]
    diagnostics: dict
    failures: list[str]
    wall_clock_seconds: float


def _draw_samples(req: SampleRequest) -> np.ndarray:
    law = LimitLaw(a=req.a, b=req.b)
    if req.target == "w":
        return sample_limit(law, req.n, req.seed)
    if req.target == "feller_endpoint":
        if req.t is None or not req.t > 0.0:
            raise ValueError("target feller_endpoint requires a positive t")
        return exact_feller_endpoint(req.a, req.b, req.t, req.n, req.seed)
    if req.model is None:
        raise ValueError("target x0 requires a model name")
    model = builtin_model(req.model, req.a)
    return sample_initial_conditions(model, law, req.n, req.seed)


def create_app() -> FastAPI:
    app = FastAPI(title="smallnoise", version=__version__)

    @app.exception_handler(SimulationError)
    @app.exception_handler(FlowSolverError)
    @app.exception_handler(PrecisionError)
    async def _numerical_failure(request, exc):  # pragma: no cover - thin glue
        from fastapi.responses import JSONResponse

        return JSONResponse(status_code=500, content={"detail": str(exc)})

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/validate", response_model=ValidateResponse)
    def validate(req: ValidateRequest) -> ValidateResponse:
        try:
            model = builtin_model(req.model, req.a)
            report = validate_model(model, grid_size=req.grid_size)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return ValidateResponse(
            model=report.model_name,
            ok=report.ok,
            violations=list(report.violations),
            grid_size=report.grid_size,
            grid_upper=report.grid_upper,
        )

    @app.post("/sample", response_model=SampleResponse)
    def sample(req: SampleRequest) -> SampleResponse:
        try:
            samples = _draw_samples(req)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return SampleResponse(
            target=req.target, n=req.n, seed=req.seed, samples=samples.tolist()
        )

    @app.post("/experiment", response_model=ExperimentResponse)
    def experiment(config: dict) -> ExperimentResponse:
        try:
            cfg = ExperimentConfig.from_dict(config)
        except (ValueError, TypeError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        report = run_experiment(cfg)
        payload = report.as_json_dict()
        return ExperimentResponse(**payload)

    return app
