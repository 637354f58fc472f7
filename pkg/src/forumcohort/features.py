"""Word-level tokenization, vocabulary fitting, and document encodings.

Keyword models consume binary presence vectors; the encoder consumes
fixed-length token-id sequences with a leading CLS position. Specials
occupy indices 0-3 (PAD, UNK, MASK, CLS); real tokens start at index 4.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .cohort import HeldOutExamples, LabeledExample
from .errors import DataError, EmptyCorpus, LeakageError, UsageError

PAD_ID = 0
UNK_ID = 1
MASK_ID = 2
CLS_ID = 3
SPECIAL_TOKENS = ("<pad>", "<unk>", "<mask>", "<cls>")
N_SPECIALS = len(SPECIAL_TOKENS)

_VOCAB_MAGIC = "vocab-v1"


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric boundaries; an apostrophe
    is kept when flanked by alphanumerics on both sides."""
    text = text.lower()
    tokens: list[str] = []
    current: list[str] = []
    n = len(text)
    for i, ch in enumerate(text):
        if ch.isalnum():
            current.append(ch)
        elif (
            ch == "'"
            and current
            and current[-1].isalnum()
            and i + 1 < n
            and text[i + 1].isalnum()
        ):
            current.append(ch)
        elif current:
            tokens.append("".join(current))
            current = []
    if current:
        tokens.append("".join(current))
    return tokens


class Vocabulary:
    """Bijective token/index map over non-special entries.

    Tokens are ordered most-frequent-first with lexicographic tie-break;
    ``max_size`` caps the total size including the four specials.
    """

    def __init__(self, tokens: Sequence[str], min_count: int, max_size: int):
        self.min_count = min_count
        self.max_size = max_size
        self.index_to_token: list[str] = list(SPECIAL_TOKENS) + list(tokens)
        self.token_to_index: dict[str, int] = {
            token: i for i, token in enumerate(self.index_to_token)
        }
        if len(self.token_to_index) != len(self.index_to_token):
            raise DataError("vocabulary tokens are not unique")

    def __len__(self) -> int:
        return len(self.index_to_token)

    @property
    def n_features(self) -> int:
        """Number of non-special entries (the keyword-model feature count)."""
        return len(self.index_to_token) - N_SPECIALS

    def index_of(self, token: str) -> int:
        return self.token_to_index.get(token, UNK_ID)

    def token_at(self, index: int) -> str:
        return self.index_to_token[index]


def _reject_held_out(docs) -> None:
    if isinstance(docs, HeldOutExamples):
        raise LeakageError(
            "vocabulary fitting only accepts training documents; "
            "got the held-out side of a split"
        )


def fit_vocabulary(
    docs: Iterable[str],
    min_count: int = 2,
    max_size: int = 20000,
) -> Vocabulary:
    """Fit over raw document strings from the training split only."""
    _reject_held_out(docs)
    if min_count < 1:
        raise UsageError(f"min_count must be >= 1, got {min_count}")
    if max_size <= N_SPECIALS:
        raise UsageError(f"max_size must exceed {N_SPECIALS}, got {max_size}")
    counts: Counter[str] = Counter()
    n_docs = 0
    for doc in docs:
        n_docs += 1
        counts.update(tokenize(doc))
    if n_docs == 0:
        raise EmptyCorpus("vocabulary fitting requires at least one document")
    eligible = [(-count, token) for token, count in counts.items() if count >= min_count]
    eligible.sort()
    kept = [token for _, token in eligible[: max_size - N_SPECIALS]]
    return Vocabulary(kept, min_count=min_count, max_size=max_size)


def fit_vocabulary_from_examples(
    examples: Sequence[LabeledExample],
    min_count: int = 2,
    max_size: int = 20000,
) -> Vocabulary:
    _reject_held_out(examples)
    return fit_vocabulary(
        (ex.post.text for ex in examples), min_count=min_count, max_size=max_size
    )


@dataclass(frozen=True)
class FeatureVector:
    """Binary presence representation over non-special vocabulary indices."""

    doc_id: str
    indices: tuple[int, ...]
    counts: tuple[int, ...]


@dataclass(frozen=True)
class TokenSequence:
    """CLS-prefixed id sequence padded/truncated to exactly ``max_len``."""

    doc_id: str
    ids: tuple[int, ...]


def vectorize_tokens(doc_id: str, tokens: Sequence[str], vocab: Vocabulary) -> FeatureVector:
    counter: Counter[int] = Counter()
    for token in tokens:
        index = vocab.index_of(token)
        if index != UNK_ID:
            counter[index] += 1
    indices = tuple(sorted(counter))
    return FeatureVector(
        doc_id=doc_id,
        indices=indices,
        counts=tuple(counter[i] for i in indices),
    )


def vectorize(doc_id: str, text: str, vocab: Vocabulary) -> FeatureVector:
    return vectorize_tokens(doc_id, tokenize(text), vocab)


def encode_tokens(
    doc_id: str, tokens: Sequence[str], vocab: Vocabulary, max_len: int
) -> TokenSequence:
    if max_len < 2:
        raise UsageError(f"max_len must be >= 2, got {max_len}")
    ids = [CLS_ID]
    for token in tokens[: max_len - 1]:
        ids.append(vocab.token_to_index.get(token, UNK_ID))
    ids.extend([PAD_ID] * (max_len - len(ids)))
    return TokenSequence(doc_id=doc_id, ids=tuple(ids))


def encode(doc_id: str, text: str, vocab: Vocabulary, max_len: int) -> TokenSequence:
    return encode_tokens(doc_id, tokenize(text), vocab, max_len)


def decode(sequence: TokenSequence, vocab: Vocabulary) -> list[str]:
    """Recover the in-vocabulary tokens of a sequence (specials dropped)."""
    return [vocab.token_at(i) for i in sequence.ids if i >= N_SPECIALS]


def save_vocabulary(vocab: Vocabulary, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    header = (
        f"{_VOCAB_MAGIC} total={len(vocab)} specials={','.join(SPECIAL_TOKENS)} "
        f"min_count={vocab.min_count} max_size={vocab.max_size}"
    )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for token in vocab.index_to_token[N_SPECIALS:]:
            fh.write(token + "\n")


def load_vocabulary(path: Path) -> Vocabulary:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        fields = header.split()
        if not fields or fields[0] != _VOCAB_MAGIC:
            raise DataError(f"{path}: not a vocabulary file")
        meta = dict(part.split("=", 1) for part in fields[1:])
        tokens = [line.rstrip("\n") for line in fh if line.rstrip("\n")]
    vocab = Vocabulary(
        tokens,
        min_count=int(meta["min_count"]),
        max_size=int(meta["max_size"]),
    )
    if len(vocab) != int(meta["total"]):
        raise DataError(f"{path}: token count does not match header")
    return vocab
