"""Manual verbalizer: one label word per class, softmax at the mask.

The scorer returns one logit per label word at the mask position; this
module normalizes them into class probabilities and picks the argmax.
Exact ties resolve to the lowest class index, so putting the semantically
neutral class first makes an evidence-free note land there.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import LabelWordCollision, NonFiniteLogit, TokenizationFailure
from .tasks import TaskConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Prediction:
    class_index: int
    probabilities: tuple[float, ...]


def stable_softmax(logits) -> np.ndarray:
    """Max-shifted softmax; exact for ties and safe for large logits."""
    arr = np.asarray(logits, dtype=float)
    shifted = arr - arr.max()
    expd = np.exp(shifted)
    return expd / expd.sum()


def predict(logits) -> Prediction:
    """Softmax over label-word logits, argmax with first-index tie-break."""
    arr = np.asarray(logits, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("predict expects a non-empty 1-d logit vector")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteLogit(f"non-finite logit in {arr.tolist()!r}")
    probs = stable_softmax(arr)
    return Prediction(int(np.argmax(probs)), tuple(float(p) for p in probs))


def resolve_label_words(task: TaskConfig, scorer) -> list[str]:
    """Tokenize each class's label word; multi-piece words keep the first piece.

    Returns the per-class label-word token ids in class order.  Degenerate
    verbalizers (two classes collapsing onto one token) are fatal.
    """
    ids: list[str] = []
    for cls, word in zip(task.classes, task.label_words):
        pieces = scorer.tokenize(word)
        if not pieces:
            raise TokenizationFailure(f"label word {word!r} (class {cls!r}) produced no tokens")
        if len(pieces) > 1:
            logger.warning(
                "label word %r (class %r) splits into %d pieces; using the first, %r",
                word, cls, len(pieces), pieces[0],
            )
        ids.append(pieces[0])
    if len(set(ids)) != len(ids):
        dupes = sorted({t for t in ids if ids.count(t) > 1})
        raise LabelWordCollision(
            f"label words of task {task.name!r} collide after tokenization: {dupes}"
        )
    return ids
