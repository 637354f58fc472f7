"""Pydantic request/response models for the pipeline service.

Every request carries the config resolution inputs (optional config file
path, flat overrides, seed); every response echoes the resolved config so
clients can display exactly what ran.
"""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class StageRequest(BaseModel):
    config_file: Optional[str] = None
    overrides: dict[str, str] = Field(default_factory=dict)
    seed: Optional[int] = None
    out_dir: str = "out"


class StageResponse(BaseModel):
    resolved_config: dict[str, str]


class HealthResponse(BaseModel):
    status: str
    version: str


class ConfigResponse(StageResponse):
    pass


class IngestRequest(StageRequest):
    inputs: list[str]


class IngestResponse(StageResponse):
    n_records: int
    n_parse_errors: int
    n_posts: int
    n_rejected: dict[str, int]
    posts_path: str
    errors_path: str


class LabelRequest(StageRequest):
    posts_path: str


class LabelResponse(StageResponse):
    n_users: int
    n_examples: int
    n_positive: int
    n_negative: int
    exclusions: dict[str, int]
    labeled_path: str


class SplitRequest(StageRequest):
    labeled_path: str


class SplitResponse(StageResponse):
    n_train: int
    n_test: int
    n_shared_authors: int
    train_path: str
    test_path: str
    manifest_path: str
    manifest_sha256: str


class SynthRequest(StageRequest):
    pass


class SynthResponse(StageResponse):
    n_examples: int
    mode: str
    corpus_path: str
    truth_path: str


class TrainRequest(StageRequest):
    train_path: str
    model: str  # nb | lr | transformer


class TrainResponse(StageResponse):
    model_kind: str
    n_examples: int
    vocab_size: int
    model_path: str
    vocab_path: str
    log_path: str
    final_loss: Optional[float] = None


class EvaluateRequest(StageRequest):
    model_path: str
    vocab_path: str
    test_path: str


class EvaluateResponse(StageResponse):
    model_id: str
    n_examples: int
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    precision_pos: float
    recall_pos: float
    f1_pos: float
    precision_neg: float
    recall_neg: float
    f1_neg: float
    base_rate: float
    threshold: float
    eval_path: str


class GridRequest(StageRequest):
    family: str  # nb | lr
    train_path: str
    validation_path: Optional[str] = None


class GridResponse(StageResponse):
    family: str
    best: dict[str, float]
    table: list[dict]
    grid_path: str
    n_train: int
    n_validation: int


class ExplainRequest(StageRequest):
    model_path: str
    vocab_path: str
    store_path: str
    post_id: str


class ExplainResponse(StageResponse):
    post_id: str
    model_id: str
    base_score: float
    n_tokens: int
    n_spans: int
    html_path: str
    tsv_path: str


class ReportRequest(StageRequest):
    eval_paths: list[str]
    manifest_path: Optional[str] = None


class ReportResponse(StageResponse):
    n_models: int
    report_path: str
    report_sha256: str


class PredictRequest(StageRequest):
    model_path: str
    vocab_path: str
    texts: list[str]


class PredictResponse(StageResponse):
    model_id: str
    probabilities: list[list[float]]
