"""Exception types shared across the package.

Everything raised on purpose derives from KotiError so callers (and the
CLI) can catch one base class and report the error name.
"""


class KotiError(Exception):
    """Base class for errors raised by this package."""


class TokenizationFailure(KotiError):
    """The active tokenizer could not process the given text."""


class InputTooLong(KotiError):
    """A prompt exceeds the scorer's declared input capacity."""


class LabelWordCollision(KotiError):
    """Two classes resolved to the same label-word token."""


class NonFiniteLogit(KotiError):
    """A logit handed to the verbalizer was NaN or infinite."""


class DivergenceDetected(KotiError):
    """Training loss became non-finite (typically the learning rate is too hot)."""


class WorkerProtocolError(KotiError):
    """The model worker process sent a malformed reply, died, or reported an error."""


class InsufficientClassExamples(KotiError):
    """A class has fewer labeled examples than the requested per-class sample size."""


class SampleTooLarge(KotiError):
    """Requested sample size exceeds the dataset size."""


class EmptyEvaluation(KotiError):
    """Metrics were requested for an empty evaluation set."""


class ParseError(KotiError):
    """A dataset file could not be parsed; the message names the offending line."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


class DuplicateId(KotiError):
    """Two notes in the same dataset share an id."""


class InvalidSpec(KotiError):
    """Synthetic corpus parameters are inconsistent (bad counts, depth past note end, ...)."""
