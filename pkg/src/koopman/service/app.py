"""HTTP service exposing the full pipeline.

Stateless by design: every request carries its own data or a config that
regenerates it, so responses depend only on the request body. Error mapping
follows the CLI's exit-code split: bad input is 400, numerical failure is
422 (FastAPI's own request-validation errors are folded into 400 so that 422
always means the computation, not the envelope, went wrong).
"""

from __future__ import annotations

import os
import tempfile

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .. import __version__
from ..analysis import analyze
from ..config import ExperimentConfig
from ..dynamics import generate_training_set, get_system
from ..edmd import assemble, fit, fit_with_control, predict_corrected, predict_straight
from ..exceptions import InputError, NumericsError
from ..ingest import IngestSpec, ingest_manifest, ingest_measurements
from ..observables import build_dictionary
from ..reproduce import run_reproduction, train_from_config
from .schemas import (
    AnalyzeRequest,
    FitRequest,
    FitResponse,
    GenerateRequest,
    GenerateResponse,
    IngestRequest,
    IngestResponse,
    ModelPayload,
    PredictRequest,
    PredictResponse,
    ReproduceRequest,
    ReproduceResponse,
    TrajectoryPayload,
)

__all__ = ["create_app", "app"]


def create_app() -> FastAPI:
    app = FastAPI(title="koopman-toolkit", version=__version__)

    @app.exception_handler(InputError)
    async def _input_error(request: Request, exc: InputError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(NumericsError)
    async def _numerics_error(request: Request, exc: NumericsError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(RequestValidationError)
    async def _request_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": str(exc.errors())})

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/generate", response_model=GenerateResponse)
    def generate(req: GenerateRequest) -> GenerateResponse:
        system = get_system(req.system)
        signals = [s.to_signal() for s in req.signals]
        trajectories = generate_training_set(
            system, req.n_trajectories, req.duration, req.dt, signals, seed=req.seed
        )
        manifest = {
            "system": req.system,
            "seed": req.seed,
            "dt": req.dt,
            "trajectories": [
                {
                    "seed": None if t.seed is None else int(t.seed),
                    "samples": t.samples,
                    "signal": t.signal.to_dict() if t.signal is not None else None,
                }
                for t in trajectories
            ],
        }
        return GenerateResponse(
            trajectories=[TrajectoryPayload.from_trajectory(t) for t in trajectories],
            manifest=manifest,
        )

    @app.post("/fit", response_model=FitResponse)
    def fit_endpoint(req: FitRequest) -> FitResponse:
        if (req.config is None) == (req.trajectories is None):
            raise InputError("provide exactly one of 'config' or 'trajectories'")
        if req.config is not None:
            config = ExperimentConfig.from_dict(req.config)
            model, _, provenance = train_from_config(config)
            return FitResponse(model=ModelPayload.from_model(model, provenance))
        if req.system is None or req.dictionary_size is None:
            raise InputError("fitting supplied trajectories needs 'system' and 'dictionary_size'")
        dictionary = build_dictionary(req.system, req.dictionary_size)
        snapshots = assemble([t.to_trajectory() for t in req.trajectories])
        if req.controlled:
            model = fit_with_control(snapshots, dictionary)
        else:
            model = fit(snapshots, dictionary)
        provenance = {"training": snapshots.manifest}
        return FitResponse(model=ModelPayload.from_model(model, provenance))

    @app.post("/predict", response_model=PredictResponse)
    def predict(req: PredictRequest) -> PredictResponse:
        model = req.model.to_model()
        if req.steps < 0:
            raise InputError("steps must be >= 0")
        u = None if req.u is None else np.array(req.u, dtype=float)
        times = (np.arange(req.steps + 1) * model.dt).tolist()
        straight = corrected = None
        if req.scheme in ("straight", "both"):
            _, states = predict_straight(model, req.x0, u, req.steps)
            if not np.all(np.isfinite(states)):
                raise NumericsError("straight rollout left the representable range")
            straight = states.tolist()
        if req.scheme in ("corrected", "both"):
            corrected = predict_corrected(model, req.x0, u, req.steps).tolist()
        return PredictResponse(times=times, straight=straight, corrected=corrected)

    @app.post("/analyze")
    def analyze_endpoint(req: AnalyzeRequest) -> dict:
        report = analyze(req.model.to_model(), use_continuous=req.use_continuous,
                         rank_method=req.rank_method)
        return report.to_dict()

    @app.post("/ingest", response_model=IngestResponse)
    def ingest(req: IngestRequest) -> IngestResponse:
        if not req.files:
            raise InputError("ingest request carries no files")
        with tempfile.TemporaryDirectory() as tmp:
            paths = []
            for item in req.files:
                base = os.path.basename(item.name) or "measurement.csv"
                path = os.path.join(tmp, base)
                with open(path, "w") as fh:
                    fh.write(item.content)
                paths.append(path)
            spec = IngestSpec(
                paths=tuple(paths),
                time_column=req.time_column,
                angle_column=req.angle_column,
                velocity_column=req.velocity_column,
                input_columns=tuple(req.input_columns),
                window=req.window,
            )
            trajectories = ingest_measurements(spec)
            manifest = ingest_manifest(spec, trajectories)
        # report the client's names, not the temp paths
        for entry, item in zip(manifest["files"], req.files):
            entry["source"] = item.name
        return IngestResponse(
            trajectories=[TrajectoryPayload.from_trajectory(t) for t in trajectories],
            manifest=manifest,
        )

    @app.post("/reproduce", response_model=ReproduceResponse)
    def reproduce(req: ReproduceRequest) -> ReproduceResponse:
        with tempfile.TemporaryDirectory() as tmp:
            summary = run_reproduction(req.target, tmp, seed=req.seed)
            files = {}
            for name in sorted(os.listdir(tmp)):
                with open(os.path.join(tmp, name)) as fh:
                    files[name] = fh.read()
        return ReproduceResponse(summary=summary, files=files)

    return app


app = create_app()
