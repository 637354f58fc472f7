"""Pipeline stages behind the service endpoints and CLI subcommands.

Each function reads/writes store files under explicit paths, is
deterministic for a fixed config+seed, and returns a JSON-serializable
summary dict.
"""

from __future__ import annotations

import json
import hashlib
from pathlib import Path
from typing import Sequence

import numpy as np

from . import cohort as cohort_mod
from . import records as records_mod
from .cohort import (
    HeldOutExamples,
    LabeledExample,
    POSITIVE_LABEL,
    SplitSpec,
    SplitUnit,
    TrainTestSplit,
    balance,
    read_examples,
    split,
    write_examples,
    write_manifest,
)
from .config import PipelineConfig
from .encoder import (
    EncoderConfig,
    init_model,
    load_checkpoint,
    save_checkpoint,
    sequences_to_matrix,
)
from .errors import DataError, UsageError
from .evaluation import evaluate, grid_search, render_report, result_from_counts
from .features import (
    Vocabulary,
    encode_tokens,
    fit_vocabulary_from_examples,
    load_vocabulary,
    save_vocabulary,
    tokenize,
    vectorize_tokens,
)
from .logistic import load_lr, lr_fit, lr_predict_proba, save_lr
from .naive_bayes import load_nb, nb_fit, nb_predict_proba, save_nb
from .occlusion import explain, write_report
from .predictors import EncoderPredictor, KeywordPredictor, Predictor
from .synth import SynthMode, SynthSpec, default_pool, generate
from .training import TrainConfig, train

MODEL_FILES = {"nb": "nb.model", "lr": "lr.model", "transformer": "encoder.ckpt"}


def _require(path: Path, what: str) -> Path:
    path = Path(path)
    if not path.exists():
        raise DataError(f"{what} not found: {path}")
    return path


def _labels(examples: Sequence[LabeledExample]) -> list[int]:
    return [1 if ex.label == POSITIVE_LABEL else 0 for ex in examples]


def _write_json(obj, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def run_ingest(inputs: Sequence[Path], out_dir: Path, cfg: PipelineConfig) -> dict:
    if not inputs:
        raise UsageError("ingest requires at least one dump file")
    out_dir = Path(out_dir)
    seen_ids: set[str] = set()
    posts: list[records_mod.Post] = []
    rejected: dict[str, int] = {}
    error_rows: list[dict] = []
    n_records = 0
    for input_path in inputs:
        input_path = _require(Path(input_path), "dump file")
        with open(input_path, "rb") as fh:
            file_records, file_errors = records_mod.parse_records(fh, seen_ids)
        n_records += len(file_records)
        error_rows.extend(
            {"file": str(input_path), "line": e.line_number, "reason": e.reason}
            for e in file_errors
        )
        for record in file_records:
            outcome = records_mod.clean(record)
            if isinstance(outcome, records_mod.Rejected):
                rejected[outcome.reason] = rejected.get(outcome.reason, 0) + 1
            else:
                posts.append(outcome)

    posts_path = out_dir / "posts.ndjson"
    records_mod.write_posts(posts, posts_path)
    errors_path = out_dir / "ingest_errors.ndjson"
    errors_path.parent.mkdir(parents=True, exist_ok=True)
    with open(errors_path, "w", encoding="utf-8", newline="\n") as fh:
        for row in error_rows:
            fh.write(records_mod.dump_ndjson_line(row) + "\n")
    return {
        "n_records": n_records,
        "n_parse_errors": len(error_rows),
        "n_posts": len(posts),
        "n_rejected": rejected,
        "posts_path": str(posts_path),
        "errors_path": str(errors_path),
    }


def run_label(posts_path: Path, out_dir: Path, cfg: PipelineConfig) -> dict:
    posts = records_mod.read_posts(_require(posts_path, "posts store"))
    timelines = records_mod.build_timelines(posts)
    examples, exclusions = cohort_mod.label_corpus(
        timelines.values(),
        anxiety_forum=cfg.get_str("anxiety_forum"),
        adhd_forum=cfg.get_str("adhd_forum"),
        window_seconds=cfg.get_int("window_seconds"),
    )
    labeled_path = Path(out_dir) / "labeled.ndjson"
    write_examples(examples, labeled_path)
    n_positive = sum(1 for ex in examples if ex.label == POSITIVE_LABEL)
    return {
        "n_users": len(timelines),
        "n_examples": len(examples),
        "n_positive": n_positive,
        "n_negative": len(examples) - n_positive,
        "exclusions": exclusions,
        "labeled_path": str(labeled_path),
    }


def run_split(labeled_path: Path, out_dir: Path, cfg: PipelineConfig) -> dict:
    examples = read_examples(_require(labeled_path, "labeled store"))
    spec = SplitSpec(
        test_fraction=cfg.get_float("test_fraction"),
        seed=cfg.get_int("seed"),
        unit=SplitUnit(cfg.get_str("split_unit")),
    )
    result = split(examples, spec)
    # Balance after splitting, independently per side, so both sides sit
    # at the 50% base rate.
    train_side = balance(list(result.train), spec.seed)
    test_side = balance(list(result.test.examples), spec.seed)
    balanced = TrainTestSplit(
        train=tuple(train_side), test=HeldOutExamples(test_side), spec=spec
    )
    out_dir = Path(out_dir)
    train_path = out_dir / "train.ndjson"
    test_path = out_dir / "test.ndjson"
    manifest_path = out_dir / "split_manifest.json"
    write_examples(train_side, train_path)
    write_examples(test_side, test_path)
    manifest_sha256 = write_manifest(balanced, manifest_path, balanced=True)
    train_authors = {ex.author for ex in train_side}
    test_authors = {ex.author for ex in test_side}
    return {
        "n_train": len(train_side),
        "n_test": len(test_side),
        "n_shared_authors": len(train_authors & test_authors),
        "train_path": str(train_path),
        "test_path": str(test_path),
        "manifest_path": str(manifest_path),
        "manifest_sha256": manifest_sha256,
    }


def synth_spec_from_config(cfg: PipelineConfig) -> SynthSpec:
    return SynthSpec(
        mode=SynthMode(cfg.get_str("synth_mode")),
        users_per_class=cfg.get_int("synth_users_per_class"),
        posts_per_user=cfg.get_int_pair("synth_posts_per_user"),
        doc_len=cfg.get_int_pair("synth_doc_len"),
        vocab_pool=default_pool(cfg.get_int("synth_vocab_pool_size")),
        signal_strength=cfg.get_float("synth_signal_strength"),
        seed=cfg.get_int("seed"),
        forum=cfg.get_str("anxiety_forum"),
    )


def run_synth(out_dir: Path, cfg: PipelineConfig) -> dict:
    examples, truth = generate(synth_spec_from_config(cfg))
    out_dir = Path(out_dir)
    corpus_path = out_dir / "synth.ndjson"
    truth_path = out_dir / "synth_truth.json"
    write_examples(examples, corpus_path)
    _write_json(truth, truth_path)
    return {
        "n_examples": len(examples),
        "mode": truth["mode"],
        "corpus_path": str(corpus_path),
        "truth_path": str(truth_path),
    }


def _fit_vocab(examples: Sequence[LabeledExample], cfg: PipelineConfig) -> Vocabulary:
    return fit_vocabulary_from_examples(
        examples,
        min_count=cfg.get_int("min_count"),
        max_size=cfg.get_int("max_vocab_size"),
    )


def run_train(train_path: Path, model_kind: str, out_dir: Path, cfg: PipelineConfig) -> dict:
    if model_kind not in MODEL_FILES:
        raise UsageError(
            f"unknown model kind {model_kind!r}; expected one of {sorted(MODEL_FILES)}"
        )
    examples = read_examples(_require(train_path, "training store"))
    if not examples:
        raise DataError(f"training store is empty: {train_path}")
    out_dir = Path(out_dir)
    vocab = _fit_vocab(examples, cfg)
    vocab_path = out_dir / "vocab.txt"
    save_vocabulary(vocab, vocab_path)
    labels = _labels(examples)
    model_path = out_dir / MODEL_FILES[model_kind]
    log_rows: list[dict] = []

    if model_kind == "nb":
        vectors = [vectorize_tokens(ex.post.id, tokenize(ex.post.text), vocab) for ex in examples]
        model = nb_fit(vectors, labels, n_features=len(vocab), alpha=cfg.get_float("nb_alpha"))
        save_nb(model, model_path)
    elif model_kind == "lr":
        vectors = [vectorize_tokens(ex.post.id, tokenize(ex.post.text), vocab) for ex in examples]
        model = lr_fit(
            vectors,
            labels,
            n_features=len(vocab),
            lam=cfg.get_float("lr_lambda"),
            learning_rate=cfg.get_float("lr_learning_rate"),
            epochs=cfg.get_int("lr_epochs"),
            seed=cfg.get_int("seed"),
        )
        save_lr(model, model_path)
        log_rows = [{"epoch": i, "loss": loss} for i, loss in enumerate(model.loss_log)]
    else:
        max_len = cfg.get_int("max_len")
        sequences = [
            encode_tokens(ex.post.id, tokenize(ex.post.text), vocab, max_len)
            for ex in examples
        ]
        ids = sequences_to_matrix(sequences)
        encoder_config = EncoderConfig(
            vocab_size=len(vocab),
            d_model=cfg.get_int("d_model"),
            n_heads=cfg.get_int("n_heads"),
            n_layers=cfg.get_int("n_layers"),
            d_ff=cfg.get_int("d_ff"),
            max_len=max_len,
            dropout_p=cfg.get_float("dropout_p"),
        )
        model = init_model(encoder_config, seed=cfg.get_int("seed"))
        train_config = TrainConfig(
            learning_rate=cfg.get_float("learning_rate"),
            adam_beta1=cfg.get_float("adam_beta1"),
            adam_beta2=cfg.get_float("adam_beta2"),
            adam_eps=cfg.get_float("adam_eps"),
            epochs=cfg.get_int("epochs"),
            batch_size=cfg.get_int("batch_size"),
            seed=cfg.get_int("seed"),
        )
        log = train(model, ids, labels, train_config)
        save_checkpoint(model, model_path)
        log_rows = log.to_rows()

    log_path = out_dir / f"train_log_{model_kind}.json"
    _write_json(log_rows, log_path)
    return {
        "model_kind": model_kind,
        "n_examples": len(examples),
        "vocab_size": len(vocab),
        "model_path": str(model_path),
        "vocab_path": str(vocab_path),
        "log_path": str(log_path),
        "final_loss": log_rows[-1]["loss"] if log_rows else None,
    }


def _sniff_magic(path: Path) -> str:
    with open(path, "rb") as fh:
        first = fh.readline(128).decode("utf-8", errors="replace")
    return first.split()[0] if first.split() else ""


def load_predictor(model_path: Path, vocab_path: Path) -> Predictor:
    model_path = _require(model_path, "model file")
    vocab = load_vocabulary(_require(vocab_path, "vocabulary file"))
    magic = _sniff_magic(model_path)
    if magic == "nb-model-v1":
        return KeywordPredictor(load_nb(model_path), vocab, model_id="nb")
    if magic == "lr-model-v1":
        return KeywordPredictor(load_lr(model_path), vocab, model_id="lr")
    if magic == "encoder-checkpoint-v1":
        return EncoderPredictor(load_checkpoint(model_path), vocab, model_id="transformer")
    raise DataError(f"{model_path}: unrecognized model file")


def run_evaluate(
    model_path: Path, vocab_path: Path, test_path: Path, out_dir: Path, cfg: PipelineConfig
) -> dict:
    predictor = load_predictor(model_path, vocab_path)
    examples = read_examples(_require(test_path, "test store"))
    result = evaluate(predictor, examples, threshold=cfg.get_float("threshold"))
    eval_path = Path(out_dir) / f"eval_{predictor.model_id}.json"
    _write_json(result.to_dict(), eval_path)
    summary = result.to_dict()
    summary["eval_path"] = str(eval_path)
    return summary


def _fit_eval_accuracy(
    family: str,
    params: dict,
    cfg: PipelineConfig,
    vocab: Vocabulary,
    train_vectors,
    train_labels,
    val_vectors,
    val_labels,
) -> float:
    if family == "nb":
        model = nb_fit(train_vectors, train_labels, n_features=len(vocab), alpha=params["alpha"])
        probas = np.asarray([nb_predict_proba(model, v)[1] for v in val_vectors])
    else:
        model = lr_fit(
            train_vectors,
            train_labels,
            n_features=len(vocab),
            lam=params["lambda"],
            learning_rate=cfg.get_float("lr_learning_rate"),
            epochs=cfg.get_int("lr_epochs"),
            seed=cfg.get_int("seed"),
        )
        probas = lr_predict_proba(model, val_vectors)[:, 1]
    predicted = probas >= cfg.get_float("threshold")
    actual = np.asarray(val_labels, dtype=bool)
    return float((predicted == actual).mean())


def run_grid(
    family: str,
    train_path: Path,
    validation_path: Path | None,
    out_dir: Path,
    cfg: PipelineConfig,
) -> dict:
    if family not in ("nb", "lr"):
        raise UsageError(f"grid family must be 'nb' or 'lr', got {family!r}")
    train_examples = read_examples(_require(train_path, "training store"))
    if validation_path is not None:
        val_examples = read_examples(_require(validation_path, "validation store"))
    else:
        spec = SplitSpec(
            test_fraction=cfg.get_float("val_fraction"),
            seed=cfg.get_int("seed"),
            unit=SplitUnit.BY_USER,
        )
        carved = split(train_examples, spec)
        train_examples = list(carved.train)
        val_examples = list(carved.test.examples)
    if not train_examples or not val_examples:
        raise DataError("grid search requires nonempty train and validation sets")

    vocab = _fit_vocab(train_examples, cfg)
    train_vectors = [
        vectorize_tokens(ex.post.id, tokenize(ex.post.text), vocab) for ex in train_examples
    ]
    val_vectors = [
        vectorize_tokens(ex.post.id, tokenize(ex.post.text), vocab) for ex in val_examples
    ]
    train_labels = _labels(train_examples)
    val_labels = _labels(val_examples)

    if family == "nb":
        candidates = [{"alpha": a} for a in cfg.get_float_list("nb_alpha_grid")]
        reg_key = "alpha"
    else:
        candidates = [{"lambda": l} for l in cfg.get_float_list("lr_lambda_grid")]
        reg_key = "lambda"

    best, rows = grid_search(
        candidates,
        lambda params: _fit_eval_accuracy(
            family, params, cfg, vocab, train_vectors, train_labels, val_vectors, val_labels
        ),
        reg_key=reg_key,
    )
    table = [{"params": row.params, "accuracy": row.accuracy} for row in rows]
    grid_path = Path(out_dir) / f"grid_{family}.json"
    _write_json({"family": family, "best": best, "table": table}, grid_path)
    return {
        "family": family,
        "best": best,
        "table": table,
        "grid_path": str(grid_path),
        "n_train": len(train_examples),
        "n_validation": len(val_examples),
    }


def run_explain(
    model_path: Path,
    vocab_path: Path,
    store_path: Path,
    post_id: str,
    out_dir: Path,
    cfg: PipelineConfig,
) -> dict:
    predictor = load_predictor(model_path, vocab_path)
    text = None
    for obj in records_mod.iter_ndjson(_require(store_path, "post store")):
        if str(obj.get("id")) == post_id:
            text = str(obj.get("text", ""))
            break
    if text is None:
        raise DataError(f"post id {post_id!r} not found in {store_path}")
    tokens = tokenize(text)
    if not tokens:
        raise DataError(f"post {post_id!r} has no tokens after cleaning")
    report = explain(post_id, tokens, predictor, max_phrase_len=cfg.get_int("max_phrase_len"))
    html_path, tsv_path = write_report(report, tokens, Path(out_dir))
    return {
        "post_id": post_id,
        "model_id": report.model_id,
        "base_score": report.base_score,
        "n_tokens": len(tokens),
        "n_spans": len(report.span_deltas),
        "html_path": str(html_path),
        "tsv_path": str(tsv_path),
    }


def run_report(
    eval_paths: Sequence[Path],
    manifest_path: Path | None,
    out_dir: Path,
    cfg: PipelineConfig,
) -> dict:
    results = []
    for path in eval_paths:
        with open(_require(Path(path), "evaluation result"), "r", encoding="utf-8") as fh:
            obj = json.load(fh)
        results.append(
            result_from_counts(
                model_id=str(obj["model_id"]),
                tp=int(obj["tp"]),
                fp=int(obj["fp"]),
                tn=int(obj["tn"]),
                fn=int(obj["fn"]),
                threshold=float(obj["threshold"]),
            )
        )
    # basenames only: reruns into a different directory stay byte-identical
    provenance = {"eval_files": ",".join(Path(p).name for p in eval_paths)}
    if manifest_path is not None:
        payload = _require(Path(manifest_path), "split manifest").read_bytes()
        provenance["split_manifest"] = Path(manifest_path).name
        provenance["split_manifest_sha256"] = hashlib.sha256(payload).hexdigest()
    text = render_report(results, cfg.values, provenance)
    report_path = Path(out_dir) / "report.txt"
    report_path.parent.mkdir(parents=True, exist_ok=True)
    with open(report_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return {
        "n_models": len(results),
        "report_path": str(report_path),
        "report_sha256": hashlib.sha256(text.encode("utf-8")).hexdigest(),
    }


def run_predict(
    model_path: Path, vocab_path: Path, texts: Sequence[str], cfg: PipelineConfig
) -> dict:
    if not texts:
        raise UsageError("predict requires at least one text")
    predictor = load_predictor(model_path, vocab_path)
    positive = predictor.positive_proba(list(texts))
    return {
        "model_id": predictor.model_id,
        "probabilities": [[float(1.0 - p), float(p)] for p in positive],
    }
