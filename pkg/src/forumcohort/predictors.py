"""Uniform prediction adapters over the three model families.

A predictor exposes positive-class probabilities for raw texts plus the
token-level hooks the occlusion explainer needs. Keyword models see
binary presence vectors; the encoder sees CLS-prefixed id sequences.
"""

from __future__ import annotations

import enum
from typing import Sequence, Union

import numpy as np

from .encoder import EncoderModel, predict_proba as encoder_predict_proba
from .features import Vocabulary, encode_tokens, tokenize, vectorize_tokens
from .logistic import LogisticRegressionModel, lr_predict_proba
from .naive_bayes import NaiveBayesModel, nb_predict_proba


class ModelKind(enum.Enum):
    KEYWORD = "keyword"
    TRANSFORMER = "transformer"


class KeywordPredictor:
    """Naive Bayes or logistic regression over presence features."""

    kind = ModelKind.KEYWORD

    def __init__(
        self,
        model: Union[NaiveBayesModel, LogisticRegressionModel],
        vocab: Vocabulary,
        model_id: str = "keyword",
    ):
        self.model = model
        self.vocab = vocab
        self.model_id = model_id

    def score_tokens(self, tokens: Sequence[str]) -> float:
        """Positive-class probability of one tokenized document."""
        vec = vectorize_tokens("query", tokens, self.vocab)
        if isinstance(self.model, NaiveBayesModel):
            return float(nb_predict_proba(self.model, vec)[1])
        return float(lr_predict_proba(self.model, [vec])[0, 1])

    def positive_proba(self, texts: Sequence[str]) -> np.ndarray:
        return np.asarray([self.score_tokens(tokenize(t)) for t in texts])


class EncoderPredictor:
    """The mini transformer encoder over token-id sequences."""

    kind = ModelKind.TRANSFORMER

    def __init__(self, model: EncoderModel, vocab: Vocabulary, model_id: str = "transformer"):
        self.model = model
        self.vocab = vocab
        self.model_id = model_id

    @property
    def max_len(self) -> int:
        return self.model.config.max_len

    def encode(self, tokens: Sequence[str]) -> tuple[int, ...]:
        return encode_tokens("query", tokens, self.vocab, self.max_len).ids

    def score_ids(self, ids: Sequence[int]) -> float:
        batch = np.asarray([ids], dtype=np.int64)
        return float(encoder_predict_proba(self.model, batch)[0, 1])

    def positive_proba(self, texts: Sequence[str]) -> np.ndarray:
        ids = np.asarray([self.encode(tokenize(t)) for t in texts], dtype=np.int64)
        return encoder_predict_proba(self.model, ids)[:, 1]


Predictor = Union[KeywordPredictor, EncoderPredictor]
