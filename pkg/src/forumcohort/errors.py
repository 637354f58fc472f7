"""Exception hierarchy shared across the pipeline.

Three categories map onto process exit codes: usage errors (1), data
errors (2), and numeric failures (3).
"""


class ForumCohortError(Exception):
    """Base class for all pipeline errors."""

    exit_code = 1
    kind = "usage"


class UsageError(ForumCohortError):
    """Bad invocation: unknown flag, malformed config key, bad enum value."""

    exit_code = 1
    kind = "usage"


class DataError(ForumCohortError):
    """Input data violates a precondition or a store is malformed."""

    exit_code = 2
    kind = "data"


class NumericError(ForumCohortError):
    """A numeric computation failed (non-finite loss, divergence)."""

    exit_code = 3
    kind = "numeric"


class EmptyCorpus(DataError):
    """Vocabulary fitting received no documents."""


class EmptyClass(DataError):
    """A classifier was asked to fit with a class that has no examples."""


class EmptyTestSet(DataError):
    """Evaluation received no examples."""


class InvalidSpec(DataError):
    """A synthetic-corpus spec fails its invariants."""


class LeakageError(DataError):
    """Held-out data reached an API that may only see training data."""


class SpanOutOfBounds(DataError):
    """An occlusion span does not fit inside the tokenized post."""


class ShapeMismatch(DataError):
    """Tensor shapes are inconsistent with the encoder configuration."""


class DivergenceDetected(NumericError):
    """Gradient descent produced a non-finite loss."""


class NonFiniteLoss(NumericError):
    """Encoder training hit a non-finite loss; carries the epoch index."""

    def __init__(self, message: str, epoch: int | None = None):
        super().__init__(message)
        self.epoch = epoch
