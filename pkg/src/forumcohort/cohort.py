"""Temporal proxy labeling, class balancing, and leakage-safe splits.

A user who only ever posted in the anxiety forum contributes negative
examples; a user whose first anxiety post strictly precedes their first
ADHD post contributes positive examples, restricted to anxiety posts at
least ``window_seconds`` before the first ADHD post. ADHD-forum text is
never read and never emitted.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import DataError, EmptyClass, UsageError
from .records import (
    Post,
    UserTimeline,
    dump_ndjson_line,
    iter_ndjson,
    normalize_forum,
    post_from_dict,
    post_to_dict,
)

# 183 days, the configurable default for the exclusion window
DEFAULT_WINDOW_SECONDS = 183 * 86400


class CohortLabel(enum.Enum):
    ANXIETY_ONLY = "anxiety_only"
    ANXIETY_THEN_ADHD = "anxiety_then_adhd"


POSITIVE_LABEL = CohortLabel.ANXIETY_THEN_ADHD


@dataclass(frozen=True)
class LabeledExample:
    post: Post
    label: CohortLabel
    author: str


@dataclass(frozen=True)
class Excluded:
    reason: str


class SplitUnit(enum.Enum):
    BY_USER = "by_user"
    BY_POST = "by_post"


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.33
    seed: int = 0
    unit: SplitUnit = SplitUnit.BY_USER

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise UsageError(
                f"test_fraction must be in (0,1), got {self.test_fraction}"
            )


class HeldOutExamples:
    """Wrapper marking the test side of a split.

    Deliberately not iterable: training-side APIs (vocabulary fitting,
    model fitting helpers) reject this type, so held-out text cannot flow
    into fitting by accident. Evaluation code reads ``.examples``.
    """

    def __init__(self, examples: Sequence[LabeledExample]):
        self._examples = tuple(examples)

    @property
    def examples(self) -> tuple[LabeledExample, ...]:
        return self._examples

    def __len__(self) -> int:
        return len(self._examples)

    def __repr__(self) -> str:
        return f"HeldOutExamples(n={len(self._examples)})"


@dataclass(frozen=True)
class TrainTestSplit:
    train: tuple[LabeledExample, ...]
    test: HeldOutExamples
    spec: SplitSpec


def label_timeline(
    timeline: UserTimeline,
    anxiety_forum: str,
    adhd_forum: str,
    window_seconds: int,
) -> Union[list[LabeledExample], Excluded]:
    """Apply the temporal proxy rule to one user's timeline.

    Only the forum membership and timestamps of ADHD posts are consulted,
    never their text.
    """
    if window_seconds < 0:
        raise UsageError(f"window_seconds must be >= 0, got {window_seconds}")
    anxiety_forum = normalize_forum(anxiety_forum)
    adhd_forum = normalize_forum(adhd_forum)

    anxiety_posts = [p for p in timeline.posts if p.forum == anxiety_forum]
    adhd_times = [p.created_at for p in timeline.posts if p.forum == adhd_forum]

    if not anxiety_posts and not adhd_times:
        return Excluded("out-of-scope")
    if not adhd_times:
        return [
            LabeledExample(post=p, label=CohortLabel.ANXIETY_ONLY, author=timeline.author)
            for p in anxiety_posts
        ]
    if not anxiety_posts:
        return Excluded("adhd-first")

    first_adhd = min(adhd_times)
    first_anxiety = anxiety_posts[0].created_at
    # Equal timestamps count as ADHD-first (conservative exclusion).
    if first_adhd <= first_anxiety:
        return Excluded("adhd-first")

    cutoff = first_adhd - window_seconds
    kept = [p for p in anxiety_posts if p.created_at <= cutoff]
    if not kept:
        return Excluded("window")
    return [
        LabeledExample(post=p, label=CohortLabel.ANXIETY_THEN_ADHD, author=timeline.author)
        for p in kept
    ]


def label_corpus(
    timelines: Iterable[UserTimeline],
    anxiety_forum: str,
    adhd_forum: str,
    window_seconds: int,
) -> tuple[list[LabeledExample], dict[str, int]]:
    """Label every timeline; returns the examples plus per-reason exclusion counts."""
    examples: list[LabeledExample] = []
    exclusions: dict[str, int] = {}
    for timeline in timelines:
        outcome = label_timeline(timeline, anxiety_forum, adhd_forum, window_seconds)
        if isinstance(outcome, Excluded):
            exclusions[outcome.reason] = exclusions.get(outcome.reason, 0) + 1
        else:
            examples.extend(outcome)
    return examples, exclusions


def balance(examples: Sequence[LabeledExample], seed: int) -> list[LabeledExample]:
    """Down-sample the majority class to the minority count, uniformly at
    random with the given seed. Input order is preserved."""
    positive = [i for i, ex in enumerate(examples) if ex.label == POSITIVE_LABEL]
    negative = [i for i, ex in enumerate(examples) if ex.label != POSITIVE_LABEL]
    if not positive or not negative:
        raise EmptyClass("balance requires both classes to be nonempty")
    n = min(len(positive), len(negative))
    rng = np.random.default_rng(seed)

    def sample(indices: list[int]) -> set[int]:
        if len(indices) <= n:
            return set(indices)
        return {int(i) for i in rng.choice(indices, size=n, replace=False)}

    keep = sample(positive) | sample(negative)
    return [ex for i, ex in enumerate(examples) if i in keep]


def _hash_unit(seed: int, key: str) -> float:
    """Stable hash of (seed, key) to [0, 1)."""
    digest = hashlib.sha256(f"{seed}:{key}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


def split(examples: Sequence[LabeledExample], spec: SplitSpec) -> TrainTestSplit:
    """Assign examples to test with probability ``test_fraction`` via a
    seeded hash of the author (ByUser) or the post id (ByPost)."""
    train: list[LabeledExample] = []
    test: list[LabeledExample] = []
    for ex in examples:
        key = ex.author if spec.unit is SplitUnit.BY_USER else ex.post.id
        side = test if _hash_unit(spec.seed, key) < spec.test_fraction else train
        side.append(ex)
    return TrainTestSplit(train=tuple(train), test=HeldOutExamples(test), spec=spec)


def example_to_dict(ex: LabeledExample) -> dict:
    obj = post_to_dict(ex.post)
    obj["label"] = ex.label.value
    return obj


def example_from_dict(obj: dict) -> LabeledExample:
    label = CohortLabel(obj["label"])
    post_fields = {k: obj[k] for k in ("id", "author", "forum", "created_at", "text")}
    post = post_from_dict(post_fields)
    return LabeledExample(post=post, label=label, author=post.author)


def write_examples(examples: Iterable[LabeledExample], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ex in examples:
            fh.write(dump_ndjson_line(example_to_dict(ex)))
            fh.write("\n")


def read_examples(path: Path) -> list[LabeledExample]:
    try:
        return [example_from_dict(obj) for obj in iter_ndjson(path)]
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path}: bad labeled-example record: {exc}") from exc


def write_manifest(result: TrainTestSplit, path: Path, balanced: bool) -> str:
    """Write the split manifest; returns its sha256 hex digest."""
    manifest = {
        "format": "split-manifest-v1",
        "seed": result.spec.seed,
        "test_fraction": result.spec.test_fraction,
        "unit": result.spec.unit.value,
        "balanced": balanced,
        "train_ids": [ex.post.id for ex in result.train],
        "test_ids": [ex.post.id for ex in result.test.examples],
    }
    payload = json.dumps(manifest, indent=2) + "\n"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(payload)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()
