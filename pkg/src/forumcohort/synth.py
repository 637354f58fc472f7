"""Synthetic labeled corpora with controllable separability structure.

UnigramSignal plants a class-specific marker token, so presence features
separate the classes. OrderSignal builds matched twin documents that
share one token multiset and differ only in whether marker A precedes
marker B: per-class unigram histograms are identical by construction and
no presence/count rule can beat chance.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cohort import CohortLabel, LabeledExample
from .errors import InvalidSpec
from .records import Post

ORDER_MARKER_A = "mka"
ORDER_MARKER_B = "mkb"
UNIGRAM_MARKER_POS = "sigpos"
UNIGRAM_MARKER_NEG = "signeg"
_RESERVED = {ORDER_MARKER_A, ORDER_MARKER_B, UNIGRAM_MARKER_POS, UNIGRAM_MARKER_NEG}

_BASE_TIME = 1_600_000_000


class SynthMode(enum.Enum):
    UNIGRAM = "unigram"
    ORDER = "order"


def default_pool(size: int) -> tuple[str, ...]:
    return tuple(f"w{i:03d}" for i in range(size))


@dataclass(frozen=True)
class SynthSpec:
    mode: SynthMode
    users_per_class: int
    posts_per_user: tuple[int, int]
    doc_len: tuple[int, int]
    vocab_pool: tuple[str, ...]
    signal_strength: float = 1.0
    seed: int = 0
    forum: str = "anxiety"

    def __post_init__(self):
        if not 0.0 <= self.signal_strength <= 1.0:
            raise InvalidSpec(f"signal_strength must be in [0,1], got {self.signal_strength}")
        if not self.vocab_pool:
            raise InvalidSpec("vocab pool must be nonempty")
        if _RESERVED & set(self.vocab_pool):
            raise InvalidSpec("vocab pool must not contain marker tokens")
        if self.users_per_class < 1:
            raise InvalidSpec("users_per_class must be >= 1")
        lo, hi = self.posts_per_user
        if not 1 <= lo <= hi:
            raise InvalidSpec(f"bad posts_per_user range {self.posts_per_user}")
        lo, hi = self.doc_len
        if not 2 <= lo <= hi:
            raise InvalidSpec(f"doc_len range must start at >= 2, got {self.doc_len}")


def _make_example(
    spec: SynthSpec, doc_index: int, author: str, tokens: Sequence[str], label: CohortLabel
) -> LabeledExample:
    post = Post(
        id=f"synth-{doc_index:06d}",
        author=author,
        forum=spec.forum,
        created_at=_BASE_TIME + doc_index,
        text=" ".join(tokens),
    )
    return LabeledExample(post=post, label=label, author=author)


def _generate_order(spec: SynthSpec) -> list[LabeledExample]:
    """Matched-pair construction: each positive document gets a negative
    twin with the identical token multiset and the two markers swapped."""
    examples: list[LabeledExample] = []
    doc_index = 0
    for user in range(spec.users_per_class):
        rng = np.random.default_rng([spec.seed, 2, user])
        n_posts = int(rng.integers(spec.posts_per_user[0], spec.posts_per_user[1] + 1))
        for _ in range(n_posts):
            length = int(rng.integers(spec.doc_len[0], spec.doc_len[1] + 1))
            fillers = [spec.vocab_pool[i] for i in rng.integers(0, len(spec.vocab_pool), length)]
            carries_signal = bool(rng.random() < spec.signal_strength)
            pos_tokens = list(fillers)
            neg_tokens = list(fillers)
            if carries_signal:
                p1, p2 = sorted(rng.choice(length, size=2, replace=False))
                pos_tokens[p1], pos_tokens[p2] = ORDER_MARKER_A, ORDER_MARKER_B
                neg_tokens[p1], neg_tokens[p2] = ORDER_MARKER_B, ORDER_MARKER_A
            examples.append(
                _make_example(
                    spec, doc_index, f"user_pos{user:04d}", pos_tokens,
                    CohortLabel.ANXIETY_THEN_ADHD,
                )
            )
            doc_index += 1
            examples.append(
                _make_example(
                    spec, doc_index, f"user_neg{user:04d}", neg_tokens,
                    CohortLabel.ANXIETY_ONLY,
                )
            )
            doc_index += 1
    return examples


def _generate_unigram(spec: SynthSpec) -> list[LabeledExample]:
    examples: list[LabeledExample] = []
    doc_index = 0
    for class_index, (label, marker, prefix) in enumerate(
        (
            (CohortLabel.ANXIETY_THEN_ADHD, UNIGRAM_MARKER_POS, "user_pos"),
            (CohortLabel.ANXIETY_ONLY, UNIGRAM_MARKER_NEG, "user_neg"),
        )
    ):
        for user in range(spec.users_per_class):
            rng = np.random.default_rng([spec.seed, class_index, user])
            n_posts = int(rng.integers(spec.posts_per_user[0], spec.posts_per_user[1] + 1))
            for _ in range(n_posts):
                length = int(rng.integers(spec.doc_len[0], spec.doc_len[1] + 1))
                tokens = [
                    spec.vocab_pool[i]
                    for i in rng.integers(0, len(spec.vocab_pool), length)
                ]
                if rng.random() < spec.signal_strength:
                    tokens[int(rng.integers(0, length))] = marker
                examples.append(
                    _make_example(spec, doc_index, f"{prefix}{user:04d}", tokens, label)
                )
                doc_index += 1
    return examples


def generate(spec: SynthSpec) -> tuple[list[LabeledExample], dict]:
    """Deterministic for a fixed spec; returns examples plus a ground-truth
    description of the planted signal."""
    if spec.mode is SynthMode.ORDER:
        examples = _generate_order(spec)
        truth = {
            "mode": spec.mode.value,
            "rule": f"positive iff {ORDER_MARKER_A} precedes {ORDER_MARKER_B}",
            "markers": [ORDER_MARKER_A, ORDER_MARKER_B],
            "unigram_separable": False,
        }
    else:
        examples = _generate_unigram(spec)
        truth = {
            "mode": spec.mode.value,
            "rule": (
                f"positive iff {UNIGRAM_MARKER_POS} present; "
                f"negative iff {UNIGRAM_MARKER_NEG} present"
            ),
            "markers": [UNIGRAM_MARKER_POS, UNIGRAM_MARKER_NEG],
            "unigram_separable": True,
        }
    truth.update(
        {
            "signal_strength": spec.signal_strength,
            "users_per_class": spec.users_per_class,
            "seed": spec.seed,
            "n_examples": len(examples),
        }
    )
    return examples, truth
