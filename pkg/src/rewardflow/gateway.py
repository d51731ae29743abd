"""HTTP steering service over a loaded checkpoint.

Stateless between requests: every sample derives from (seed, sample index)
streams, so concurrent and serial execution return identical results and any
request sequence is replayable.
"""

from __future__ import annotations

import logging
import time
import uuid
from typing import Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field, model_validator

from . import __version__
from .evalsuite import measure_rewards, sweep_reward_weight
from .model import ModelCheckpoint, load_checkpoint
from .rewards import REWARD_SUITE, score_batch
from .sample import DEFAULT_ODE_STEPS, DEFAULT_OMEGA, GuidanceSpec, sample_points

logger = logging.getLogger(__name__)

MAX_COUNT = 1024
MAX_STEPS = 500


class BestOfSpec(BaseModel):
    n: int = Field(ge=1, le=MAX_COUNT, description="candidate count")
    selector: int = Field(ge=0, description="reward index used for selection")


class SampleRequest(BaseModel):
    condition: int = Field(default=0, ge=0)
    s_plus: list[float] = Field(default=[1.0, 1.0, 1.0, 1.0])
    s_minus: list[float] = Field(default=[0.0, 0.0, 0.0, 0.0])
    omega: float = Field(default=DEFAULT_OMEGA, ge=0.0)
    count: int = Field(default=1, ge=1, le=MAX_COUNT)
    seed: int = 0
    steps: int = Field(default=DEFAULT_ODE_STEPS, ge=1, le=MAX_STEPS)
    best_of: Optional[BestOfSpec] = None

    @model_validator(mode="after")
    def _targets_in_range(self):
        for name, target in (("s_plus", self.s_plus), ("s_minus", self.s_minus)):
            if any(not 0.0 <= v <= 1.0 for v in target):
                raise ValueError(f"{name} components must lie in [0, 1]")
        if len(self.s_plus) != len(self.s_minus):
            raise ValueError("s_plus and s_minus must have the same length")
        return self


class SweepRequest(BaseModel):
    reward: int = Field(ge=0)
    grid: list[float] = Field(default=[k / 8 for k in range(9)])
    samples_per_point: int = Field(default=256, ge=100, le=MAX_COUNT)
    omega: float = Field(default=DEFAULT_OMEGA, ge=0.0)
    steps: int = Field(default=DEFAULT_ODE_STEPS, ge=1, le=MAX_STEPS)
    seed: int = 0


def create_app(ckpt: ModelCheckpoint, cors_origin: str = "*") -> FastAPI:
    app = FastAPI(title="rewardflow gateway", version=__version__)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=[cors_origin] if cors_origin != "*" else ["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    checkpoint_digest = ckpt.digest()

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        # contract: invalid requests answer 400 with field-level messages
        details = [
            {"field": ".".join(str(p) for p in err["loc"] if p != "body"),
             "message": err["msg"]}
            for err in exc.errors()
        ]
        return JSONResponse(status_code=400, content={"errors": details})

    @app.exception_handler(ValueError)
    async def value_error_handler(request: Request, exc: ValueError):
        return JSONResponse(
            status_code=400,
            content={"errors": [{"field": "", "message": str(exc)}]},
        )

    @app.exception_handler(Exception)
    async def internal_handler(request: Request, exc: Exception):
        error_id = uuid.uuid4().hex
        logger.exception("request %s failed [%s]", request.url.path, error_id)
        return JSONResponse(status_code=500,
                            content={"error": "internal", "id": error_id})

    @app.get("/api/health")
    def health():
        return {"status": "ok"}

    @app.get("/api/meta")
    def meta():
        return {
            "version": __version__,
            "n_rewards": ckpt.n_rewards,
            "bins": ckpt.bins,
            "conditions": ckpt.n_conditions,
            "mode": str(ckpt.params.mode),
            "checkpoint_digest": checkpoint_digest,
            "rewards": [
                {"id": s.id, "name": s.name, "description": s.description,
                 "range_hint": list(s.range_hint)}
                for s in REWARD_SUITE[: ckpt.n_rewards]
            ],
            "defaults": {
                "omega": DEFAULT_OMEGA,
                "steps": DEFAULT_ODE_STEPS,
                "count": 1,
                "max_count": MAX_COUNT,
                "max_steps": MAX_STEPS,
            },
        }

    @app.post("/api/sample")
    def sample(req: SampleRequest):
        started = time.perf_counter()
        if req.condition >= ckpt.n_conditions:
            raise ValueError(
                f"condition must lie in [0, {ckpt.n_conditions}), got {req.condition}"
            )
        if len(req.s_plus) != ckpt.n_rewards:
            raise ValueError(f"targets must have {ckpt.n_rewards} components")
        guidance = GuidanceSpec(tuple(req.s_plus), tuple(req.s_minus), req.omega)
        if req.best_of is not None:
            if req.best_of.selector >= ckpt.n_rewards:
                raise ValueError(
                    f"selector must lie in [0, {ckpt.n_rewards}), "
                    f"got {req.best_of.selector}"
                )
            conditions = np.full(req.best_of.n, req.condition, dtype=np.int64)
            candidates = sample_points(ckpt.params, guidance, conditions,
                                       steps=req.steps, seed=req.seed)
            scores = score_batch(candidates, conditions, ckpt.n_conditions)
            best = int(np.argmax(scores[:, req.best_of.selector]))
            points = candidates[best:best + 1]
            conditions = conditions[best:best + 1]
        else:
            conditions = np.full(req.count, req.condition, dtype=np.int64)
            points = sample_points(ckpt.params, guidance, conditions,
                                   steps=req.steps, seed=req.seed)
        rewards_per_point = score_batch(points, conditions, ckpt.n_conditions)
        stats = measure_rewards(points, conditions, ckpt.n_conditions)
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        return {
            "points": [[float(p[0]), float(p[1])] for p in points],
            "rewards": [[float(v) for v in row] for row in rewards_per_point],
            "stats": {
                "mean": list(stats.mean),
                "std": list(stats.std),
                "min": list(stats.minimum),
                "max": list(stats.maximum),
                "count": stats.count,
            },
            "request": req.model_dump(),
            "checkpoint_digest": checkpoint_digest,
            "elapsed_ms": elapsed_ms,
        }

    @app.post("/api/sweep")
    def sweep(req: SweepRequest):
        if req.reward >= ckpt.n_rewards:
            raise ValueError(
                f"reward must lie in [0, {ckpt.n_rewards}), got {req.reward}"
            )
        curve = sweep_reward_weight(
            ckpt, req.reward, req.grid, samples_per_point=req.samples_per_point,
            omega=req.omega, ode_steps=req.steps, seed=req.seed,
        )
        return curve.to_json_dict()

    return app


def serve(checkpoint_path, bind: str = "127.0.0.1:8734", cors_origin: str = "*") -> None:
    """Load and digest-verify the checkpoint, then run the service."""
    import uvicorn

    ckpt = load_checkpoint(checkpoint_path)
    app = create_app(ckpt, cors_origin=cors_origin)
    host, _, port = bind.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"bind address must be host:port, got {bind!r}")
    print(f"gateway: checkpoint {ckpt.digest()[:16]} "
          f"(mode {ckpt.params.mode}, step {ckpt.step}) on http://{bind}")
    uvicorn.run(app, host=host, port=int(port), log_level="info")
