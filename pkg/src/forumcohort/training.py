"""Adam training loop for the encoder, bit-deterministic for a fixed seed.

One Generator seeded from the training seed drives both the per-epoch
shuffles and the dropout masks, so reruns replay the identical parameter
trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .encoder import (
    EncoderModel,
    cross_entropy,
    forward,
    loss_and_backward,
    predict_logits,
)
from .errors import DataError, NonFiniteLoss, UsageError


@dataclass(frozen=True)
class TrainConfig:
    # 1e-5 mirrors the fine-tuning default; from-scratch runs on synthetic
    # data typically use 1e-3.
    learning_rate: float = 1e-5
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 20
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise UsageError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not (0.0 < self.adam_beta1 < 1.0 and 0.0 < self.adam_beta2 < 1.0):
            raise UsageError("adam betas must lie strictly between 0 and 1")
        if self.epochs < 0:
            raise UsageError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise UsageError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass
class EpochStats:
    epoch: int
    loss: float
    accuracy: float


@dataclass
class TrainLog:
    epochs: list[EpochStats] = field(default_factory=list)

    def to_rows(self) -> list[dict]:
        return [
            {"epoch": e.epoch, "loss": e.loss, "accuracy": e.accuracy}
            for e in self.epochs
        ]


class AdamOptimizer:
    """Adam with bias correction: p -= lr * m_hat / (sqrt(v_hat) + eps)."""

    def __init__(self, model: EncoderModel, config: TrainConfig):
        self.config = config
        self.t = 0
        self.m = {name: np.zeros_like(arr) for name, arr in model.named_parameters()}
        self.v = {name: np.zeros_like(arr) for name, arr in model.named_parameters()}

    def step(self, model: EncoderModel, grads: dict[str, np.ndarray]) -> None:
        cfg = self.config
        self.t += 1
        bias1 = 1.0 - cfg.adam_beta1**self.t
        bias2 = 1.0 - cfg.adam_beta2**self.t
        # degenerate configs can push parameters non-finite; that state is
        # reported as NonFiniteLoss at the next forward, not warned here
        with np.errstate(invalid="ignore", over="ignore"):
            for name, param in model.named_parameters():
                g = grads[name]
                m = self.m[name]
                v = self.v[name]
                m *= cfg.adam_beta1
                m += (1.0 - cfg.adam_beta1) * g
                v *= cfg.adam_beta2
                v += (1.0 - cfg.adam_beta2) * g * g
                m_hat = m / bias1
                v_hat = v / bias2
                param -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)


def _accuracy(model: EncoderModel, ids: np.ndarray, labels: np.ndarray) -> float:
    logits = predict_logits(model, ids)
    return float((logits.argmax(axis=1) == labels).mean())


def train(
    model: EncoderModel,
    ids: np.ndarray,
    labels: Sequence[int],
    config: TrainConfig,
) -> TrainLog:
    """Train in place; returns the per-epoch loss/accuracy log.

    Raises NonFiniteLoss (carrying the epoch index) if a batch loss is
    not finite.
    """
    ids = np.asarray(ids, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if ids.shape[0] == 0:
        raise DataError("training set is empty")
    if ids.shape[0] != labels.shape[0]:
        raise DataError("ids and labels differ in length")

    rng = np.random.default_rng(config.seed)
    optimizer = AdamOptimizer(model, config)
    log = TrainLog()
    for epoch in range(config.epochs):
        order = rng.permutation(ids.shape[0])
        losses = []
        try:
            for start in range(0, ids.shape[0], config.batch_size):
                batch = order[start : start + config.batch_size]
                loss, grads = loss_and_backward(
                    model, ids[batch], labels[batch], train_mode=True, rng=rng
                )
                losses.append(loss)
                optimizer.step(model, grads)
            stats = EpochStats(
                epoch=epoch,
                loss=float(np.mean(losses)),
                accuracy=_accuracy(model, ids, labels),
            )
        except NonFiniteLoss as exc:
            raise NonFiniteLoss(f"non-finite loss in epoch {epoch}", epoch=epoch) from exc
        log.epochs.append(stats)
    return log


def evaluate_loss(model: EncoderModel, ids: np.ndarray, labels: Sequence[int]) -> float:
    logits, _ = forward(model, np.asarray(ids, dtype=np.int64), train_mode=False)
    loss, _ = cross_entropy(logits, np.asarray(labels, dtype=np.int64))
    return loss
