"""FastAPI service wrapping the pipeline.

Pipeline errors surface as HTTP 400 with a structured detail carrying the
error kind (usage/data/numeric); the CLI maps kinds onto exit codes.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__, pipeline
from ..config import PipelineConfig, resolve_config
from ..errors import ForumCohortError
from . import schemas


def _resolve(request: schemas.StageRequest) -> PipelineConfig:
    return resolve_config(
        config_file=Path(request.config_file) if request.config_file else None,
        overrides=request.overrides,
        seed=request.seed,
    )


def create_app() -> FastAPI:
    app = FastAPI(
        title="forumcohort",
        version=__version__,
        description=(
            "Forum-archive cohort labeling, keyword and contextual text "
            "classifiers, and occlusion explanations."
        ),
    )

    @app.exception_handler(ForumCohortError)
    async def _pipeline_error(request, exc: ForumCohortError):
        return JSONResponse(
            status_code=400,
            content={"detail": {"kind": exc.kind, "message": str(exc)}},
        )

    @app.get("/health", response_model=schemas.HealthResponse)
    def health() -> schemas.HealthResponse:
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/config", response_model=schemas.ConfigResponse)
    def config(request: schemas.StageRequest) -> schemas.ConfigResponse:
        return schemas.ConfigResponse(resolved_config=_resolve(request).values)

    @app.post("/ingest", response_model=schemas.IngestResponse)
    def ingest(request: schemas.IngestRequest) -> schemas.IngestResponse:
        cfg = _resolve(request)
        summary = pipeline.run_ingest(
            [Path(p) for p in request.inputs], Path(request.out_dir), cfg
        )
        return schemas.IngestResponse(resolved_config=cfg.values, **summary)

    @app.post("/label", response_model=schemas.LabelResponse)
    def label(request: schemas.LabelRequest) -> schemas.LabelResponse:
        cfg = _resolve(request)
        summary = pipeline.run_label(Path(request.posts_path), Path(request.out_dir), cfg)
        return schemas.LabelResponse(resolved_config=cfg.values, **summary)

    @app.post("/split", response_model=schemas.SplitResponse)
    def split(request: schemas.SplitRequest) -> schemas.SplitResponse:
        cfg = _resolve(request)
        summary = pipeline.run_split(Path(request.labeled_path), Path(request.out_dir), cfg)
        return schemas.SplitResponse(resolved_config=cfg.values, **summary)

    @app.post("/synth", response_model=schemas.SynthResponse)
    def synth(request: schemas.SynthRequest) -> schemas.SynthResponse:
        cfg = _resolve(request)
        summary = pipeline.run_synth(Path(request.out_dir), cfg)
        return schemas.SynthResponse(resolved_config=cfg.values, **summary)

    @app.post("/train", response_model=schemas.TrainResponse)
    def train(request: schemas.TrainRequest) -> schemas.TrainResponse:
        cfg = _resolve(request)
        summary = pipeline.run_train(
            Path(request.train_path), request.model, Path(request.out_dir), cfg
        )
        return schemas.TrainResponse(resolved_config=cfg.values, **summary)

    @app.post("/evaluate", response_model=schemas.EvaluateResponse)
    def evaluate(request: schemas.EvaluateRequest) -> schemas.EvaluateResponse:
        cfg = _resolve(request)
        summary = pipeline.run_evaluate(
            Path(request.model_path),
            Path(request.vocab_path),
            Path(request.test_path),
            Path(request.out_dir),
            cfg,
        )
        return schemas.EvaluateResponse(resolved_config=cfg.values, **summary)

    @app.post("/grid", response_model=schemas.GridResponse)
    def grid(request: schemas.GridRequest) -> schemas.GridResponse:
        cfg = _resolve(request)
        summary = pipeline.run_grid(
            request.family,
            Path(request.train_path),
            Path(request.validation_path) if request.validation_path else None,
            Path(request.out_dir),
            cfg,
        )
        return schemas.GridResponse(resolved_config=cfg.values, **summary)

    @app.post("/explain", response_model=schemas.ExplainResponse)
    def explain(request: schemas.ExplainRequest) -> schemas.ExplainResponse:
        cfg = _resolve(request)
        summary = pipeline.run_explain(
            Path(request.model_path),
            Path(request.vocab_path),
            Path(request.store_path),
            request.post_id,
            Path(request.out_dir),
            cfg,
        )
        return schemas.ExplainResponse(resolved_config=cfg.values, **summary)

    @app.post("/report", response_model=schemas.ReportResponse)
    def report(request: schemas.ReportRequest) -> schemas.ReportResponse:
        cfg = _resolve(request)
        summary = pipeline.run_report(
            [Path(p) for p in request.eval_paths],
            Path(request.manifest_path) if request.manifest_path else None,
            Path(request.out_dir),
            cfg,
        )
        return schemas.ReportResponse(resolved_config=cfg.values, **summary)

    @app.post("/predict", response_model=schemas.PredictResponse)
    def predict(request: schemas.PredictRequest) -> schemas.PredictResponse:
        cfg = _resolve(request)
        summary = pipeline.run_predict(
            Path(request.model_path), Path(request.vocab_path), request.texts, cfg
        )
        return schemas.PredictResponse(resolved_config=cfg.values, **summary)

    return app


app = create_app()
