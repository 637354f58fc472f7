"""L2-regularized logistic regression trained by full-batch gradient descent.

Loss is mean cross-entropy plus (lambda/2) ||w||^2 with the bias left
unregularized. Weights start at zero, so the first step has a closed
form that tests pin down exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, DivergenceDetected, UsageError
from .features import FeatureVector

_MAGIC = "lr-model-v1"


@dataclass
class LogisticRegressionModel:
    weights: np.ndarray  # (n_features,)
    bias: float
    lam: float
    learning_rate: float
    epochs: int
    seed: int
    loss_log: list[float] = field(default_factory=list)

    @property
    def n_features(self) -> int:
        return self.weights.shape[0]


def design_matrix(vectors: Sequence[FeatureVector], n_features: int) -> np.ndarray:
    """Dense binary presence matrix; rows are documents."""
    x = np.zeros((len(vectors), n_features), dtype=np.float64)
    for i, vec in enumerate(vectors):
        if vec.indices:
            idx = np.asarray(vec.indices, dtype=np.int64)
            if idx.max() >= n_features:
                raise DataError(
                    f"feature index {int(idx.max())} out of range "
                    f"for {n_features} features"
                )
            x[i, idx] = 1.0
    return x


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def lr_loss(x: np.ndarray, y: np.ndarray, w: np.ndarray, b: float, lam: float) -> float:
    z = x @ w + b
    # log(1 + exp(z)) - y z, computed stably via logaddexp; overflow to inf
    # is deliberate and surfaces as DivergenceDetected in lr_fit
    with np.errstate(over="ignore"):
        per_example = np.logaddexp(0.0, z) - y * z
        return float(per_example.mean() + 0.5 * lam * (w @ w))


def lr_gradient(
    x: np.ndarray, y: np.ndarray, w: np.ndarray, b: float, lam: float
) -> tuple[np.ndarray, float]:
    """Analytic gradient of the regularized loss w.r.t. (weights, bias)."""
    residual = sigmoid(x @ w + b) - y
    grad_w = x.T @ residual / x.shape[0] + lam * w
    grad_b = float(residual.mean())
    return grad_w, grad_b


def lr_fit(
    vectors: Sequence[FeatureVector],
    labels: Sequence[int],
    n_features: int,
    lam: float = 1e-3,
    learning_rate: float = 0.1,
    epochs: int = 500,
    seed: int = 0,
) -> LogisticRegressionModel:
    if learning_rate <= 0:
        raise UsageError(f"learning rate must be > 0, got {learning_rate}")
    if epochs < 1:
        raise UsageError(f"epochs must be >= 1, got {epochs}")
    if lam < 0:
        raise UsageError(f"lambda must be >= 0, got {lam}")
    if not vectors:
        raise DataError("cannot fit logistic regression on an empty set")
    x = design_matrix(vectors, n_features)
    y = np.asarray(labels, dtype=np.float64)
    if y.shape[0] != x.shape[0]:
        raise DataError("vectors and labels differ in length")

    w = np.zeros(n_features, dtype=np.float64)
    b = 0.0
    loss_log: list[float] = []
    for epoch in range(epochs):
        loss = lr_loss(x, y, w, b, lam)
        if not np.isfinite(loss):
            raise DivergenceDetected(f"non-finite loss at epoch {epoch}")
        loss_log.append(loss)
        grad_w, grad_b = lr_gradient(x, y, w, b, lam)
        w = w - learning_rate * grad_w
        b = b - learning_rate * grad_b
    final = lr_loss(x, y, w, b, lam)
    if not np.isfinite(final):
        raise DivergenceDetected(f"non-finite loss at epoch {epochs}")
    loss_log.append(final)
    return LogisticRegressionModel(
        weights=w,
        bias=b,
        lam=float(lam),
        learning_rate=float(learning_rate),
        epochs=epochs,
        seed=seed,
        loss_log=loss_log,
    )


def lr_predict_proba(
    model: LogisticRegressionModel, vectors: Sequence[FeatureVector]
) -> np.ndarray:
    """(n, 2) array of class probabilities; column 1 is the positive class."""
    x = design_matrix(vectors, model.n_features)
    positive = sigmoid(x @ model.weights + model.bias)
    return np.stack([1.0 - positive, positive], axis=1)


def save_lr(model: LogisticRegressionModel, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        _MAGIC,
        f"lambda={model.lam!r}",
        f"learning_rate={model.learning_rate!r}",
        f"epochs={model.epochs}",
        f"seed={model.seed}",
        f"n_features={model.n_features}",
        f"bias={model.bias!r}",
    ]
    for j in range(model.n_features):
        lines.append(f"weight {j} {float(model.weights[j])!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_lr(path: Path) -> LogisticRegressionModel:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _MAGIC:
        raise DataError(f"{path}: not a logistic regression model file")
    try:
        meta = dict(line.split("=", 1) for line in lines[1:7])
        n_features = int(meta["n_features"])
        weights = np.zeros(n_features, dtype=np.float64)
        for line in lines[7:]:
            _, j, value = line.split()
            weights[int(j)] = float(value)
    except (IndexError, KeyError, ValueError) as exc:
        raise DataError(f"{path}: malformed logistic regression model file") from exc
    return LogisticRegressionModel(
        weights=weights,
        bias=float(meta["bias"]),
        lam=float(meta["lambda"]),
        learning_rate=float(meta["learning_rate"]),
        epochs=int(meta["epochs"]),
        seed=int(meta["seed"]),
    )
