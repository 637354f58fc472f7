"""Evaluation metrics, grid-search driver, and the run report.

The positive class is anxiety-then-ADHD everywhere. Accuracy is the
headline metric; the confusion matrix and per-class precision/recall/F1
are always included.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .cohort import HeldOutExamples, LabeledExample, POSITIVE_LABEL
from .errors import DataError, EmptyTestSet, UsageError
from .predictors import Predictor

REFERENCE_TARGETS = (
    ("logistic regression", 54.0),
    ("naive Bayes", 58.6),
    ("fine-tuned RoBERTa", 76.0),
)


@dataclass(frozen=True)
class EvalResult:
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

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "n_examples": self.n_examples,
            "tp": self.tp,
            "fp": self.fp,
            "tn": self.tn,
            "fn": self.fn,
            "accuracy": self.accuracy,
            "precision_pos": self.precision_pos,
            "recall_pos": self.recall_pos,
            "f1_pos": self.f1_pos,
            "precision_neg": self.precision_neg,
            "recall_neg": self.recall_neg,
            "f1_neg": self.f1_neg,
            "base_rate": self.base_rate,
            "threshold": self.threshold,
        }


def _ratio(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def result_from_counts(
    model_id: str, tp: int, fp: int, tn: int, fn: int, threshold: float
) -> EvalResult:
    n = tp + fp + tn + fn
    precision_pos = _ratio(tp, tp + fp)
    recall_pos = _ratio(tp, tp + fn)
    precision_neg = _ratio(tn, tn + fn)
    recall_neg = _ratio(tn, tn + fp)
    return EvalResult(
        model_id=model_id,
        n_examples=n,
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        accuracy=_ratio(tp + tn, n),
        precision_pos=precision_pos,
        recall_pos=recall_pos,
        f1_pos=_ratio(2 * precision_pos * recall_pos, precision_pos + recall_pos),
        precision_neg=precision_neg,
        recall_neg=recall_neg,
        f1_neg=_ratio(2 * precision_neg * recall_neg, precision_neg + recall_neg),
        base_rate=_ratio(tp + fn, n),
        threshold=threshold,
    )


def evaluate(
    predictor: Predictor,
    examples: Union[Sequence[LabeledExample], HeldOutExamples],
    threshold: float = 0.5,
) -> EvalResult:
    """Score every example; predicted positive iff probability >= threshold.
    The base rate is computed from the labels, never assumed."""
    if isinstance(examples, HeldOutExamples):
        examples = examples.examples
    if not examples:
        raise EmptyTestSet("evaluation requires at least one example")
    texts = [ex.post.text for ex in examples]
    y_true = np.asarray([ex.label == POSITIVE_LABEL for ex in examples])
    y_pred = predictor.positive_proba(texts) >= threshold
    tp = int(np.sum(y_true & y_pred))
    fp = int(np.sum(~y_true & y_pred))
    tn = int(np.sum(~y_true & ~y_pred))
    fn = int(np.sum(y_true & ~y_pred))
    return result_from_counts(predictor.model_id, tp, fp, tn, fn, threshold)


@dataclass(frozen=True)
class GridRow:
    params: dict
    accuracy: float


def grid_search(
    candidates: Sequence[dict],
    evaluate_candidate: Callable[[dict], float],
    reg_key: str,
) -> tuple[dict, list[GridRow]]:
    """Best = argmax validation accuracy; ties break by smallest ``reg_key``
    value, then declaration order. Returns (best params, full table)."""
    if not candidates:
        raise UsageError("grid must contain at least one candidate")
    rows = [GridRow(params=dict(c), accuracy=float(evaluate_candidate(c))) for c in candidates]
    best_index = min(
        range(len(rows)),
        key=lambda i: (-rows[i].accuracy, rows[i].params.get(reg_key, 0.0), i),
    )
    return rows[best_index].params, rows


def _format_pct(x: float) -> str:
    return f"{100.0 * x:.2f}%"


def render_report(
    results: Sequence[EvalResult],
    resolved_config: dict[str, str],
    provenance: dict[str, str],
) -> str:
    """Self-contained deterministic run report (text)."""
    if not results:
        raise DataError("report requires at least one evaluation result")
    lines: list[str] = []
    lines.append("forumcohort run report")
    lines.append("=" * 70)
    lines.append("")
    lines.append("Provenance")
    lines.append("-" * 70)
    for key in sorted(provenance):
        lines.append(f"{key} = {provenance[key]}")
    lines.append("")
    lines.append("Resolved configuration")
    lines.append("-" * 70)
    for key in sorted(resolved_config):
        lines.append(f"{key} = {resolved_config[key]}")
    lines.append("")
    lines.append("Model evaluations")
    lines.append("-" * 70)
    for r in results:
        lines.append(f"model: {r.model_id}")
        lines.append(
            f"  n={r.n_examples}  base_rate={_format_pct(r.base_rate)}  "
            f"threshold={r.threshold}"
        )
        lines.append(f"  accuracy={_format_pct(r.accuracy)}")
        lines.append(f"  confusion: TP={r.tp} FP={r.fp} TN={r.tn} FN={r.fn}")
        lines.append(
            f"  positive class: precision={_format_pct(r.precision_pos)} "
            f"recall={_format_pct(r.recall_pos)} f1={_format_pct(r.f1_pos)}"
        )
        lines.append(
            f"  negative class: precision={_format_pct(r.precision_neg)} "
            f"recall={_format_pct(r.recall_neg)} f1={_format_pct(r.f1_neg)}"
        )
        lines.append("")
    lines.append("Reference accuracies (context only, not reproduction targets)")
    lines.append("-" * 70)
    lines.append(
        "Published accuracies for this task were measured on the original"
    )
    lines.append(
        "private Reddit corpus at a 50% base rate. That corpus is not shipped"
    )
    lines.append(
        "and live scraping is out of scope, so these numbers cannot be"
    )
    lines.append("reproduced from this repository:")
    for name, pct in REFERENCE_TARGETS:
        lines.append(f"  {name:<22s} {pct:.1f}%")
    lines.append("")
    return "\n".join(lines) + "\n"
