"""Bernoulli naive Bayes over binary presence features, from scratch.

Class 1 is the positive class throughout. Prediction uses the full
Bernoulli likelihood: absent features contribute log(1 - theta).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, EmptyClass, UsageError
from .features import FeatureVector

_MAGIC = "nb-model-v1"


@dataclass
class NaiveBayesModel:
    log_prior: np.ndarray  # (2,)
    log_theta: np.ndarray  # (2, n_features)
    log_one_minus_theta: np.ndarray  # (2, n_features)
    alpha: float

    @property
    def n_features(self) -> int:
        return self.log_theta.shape[1]


def nb_fit(
    vectors: Sequence[FeatureVector],
    labels: Sequence[int],
    n_features: int,
    alpha: float = 1.0,
) -> NaiveBayesModel:
    """theta[c][j] = (present(j, c) + alpha) / (n_c + 2 alpha)."""
    if alpha <= 0:
        raise UsageError(f"alpha must be > 0, got {alpha}")
    if len(vectors) != len(labels):
        raise DataError("vectors and labels differ in length")
    y = np.asarray(labels, dtype=np.int64)
    if y.size == 0 or not (np.any(y == 0) and np.any(y == 1)):
        raise EmptyClass("naive Bayes requires examples from both classes")

    present = np.zeros((2, n_features), dtype=np.float64)
    class_counts = np.zeros(2, dtype=np.float64)
    for vec, label in zip(vectors, y):
        class_counts[label] += 1
        for j in vec.indices:
            present[label, j] += 1.0

    theta = (present + alpha) / (class_counts[:, None] + 2.0 * alpha)
    return NaiveBayesModel(
        log_prior=np.log(class_counts / class_counts.sum()),
        log_theta=np.log(theta),
        log_one_minus_theta=np.log1p(-theta),
        alpha=float(alpha),
    )


def nb_log_joint(model: NaiveBayesModel, x: FeatureVector) -> np.ndarray:
    """Unnormalized per-class log posterior for one document."""
    base = model.log_prior + model.log_one_minus_theta.sum(axis=1)
    if x.indices:
        idx = np.asarray(x.indices, dtype=np.int64)
        if idx.max() >= model.n_features:
            raise DataError(
                f"feature index {int(idx.max())} out of range for model "
                f"with {model.n_features} features"
            )
        base = base + (
            model.log_theta[:, idx] - model.log_one_minus_theta[:, idx]
        ).sum(axis=1)
    return base


def nb_predict_proba(model: NaiveBayesModel, x: FeatureVector) -> np.ndarray:
    """Per-class probabilities, log-sum-exp normalized; sums to 1."""
    joint = nb_log_joint(model, x)
    shifted = joint - joint.max()
    weights = np.exp(shifted)
    return weights / weights.sum()


def nb_predict_proba_batch(
    model: NaiveBayesModel, xs: Sequence[FeatureVector]
) -> np.ndarray:
    return np.stack([nb_predict_proba(model, x) for x in xs])


def save_nb(model: NaiveBayesModel, path: Path) -> None:
    """Versioned text format; floats written with shortest round-trip repr."""
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        _MAGIC,
        f"alpha={model.alpha!r}",
        f"n_features={model.n_features}",
        f"log_prior={float(model.log_prior[0])!r},{float(model.log_prior[1])!r}",
    ]
    for c in range(2):
        for j in range(model.n_features):
            lines.append(
                f"feature {c} {j} {float(model.log_theta[c, j])!r} "
                f"{float(model.log_one_minus_theta[c, j])!r}"
            )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_nb(path: Path) -> NaiveBayesModel:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _MAGIC:
        raise DataError(f"{path}: not a naive Bayes model file")
    try:
        alpha = float(lines[1].split("=", 1)[1])
        n_features = int(lines[2].split("=", 1)[1])
        priors = [float(v) for v in lines[3].split("=", 1)[1].split(",")]
        log_theta = np.zeros((2, n_features), dtype=np.float64)
        log_one_minus = np.zeros((2, n_features), dtype=np.float64)
        for line in lines[4:]:
            _, c, j, lt, lo = line.split()
            log_theta[int(c), int(j)] = float(lt)
            log_one_minus[int(c), int(j)] = float(lo)
    except (IndexError, ValueError) as exc:
        raise DataError(f"{path}: malformed naive Bayes model file") from exc
    return NaiveBayesModel(
        log_prior=np.asarray(priors, dtype=np.float64),
        log_theta=log_theta,
        log_one_minus_theta=log_one_minus,
        alpha=alpha,
    )
