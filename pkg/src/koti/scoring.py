"""Scorer contract and the deterministic toy masked-LM implementation.

A scorer owns the tokenizer (budget math must happen in the model's own
token space), turns a built prompt into one logit per label word at the
mask, and optionally fine-tunes on labeled prompts.  Two implementations
exist: ToyScorer below, and the remote client in worker_client.

The toy scorer is linear and fully auditable.  Its logit for label word v
on a prompt is::

    logit(v) = bias(v) + sum over positions p != mask_index of
               weight(token_p, v) * 1 / (1 + |p - mask_index| / tau)

so evidence near the mask counts more, which is exactly what makes
template position measurable at desk scale.  Zero-shot weights: a token
matching a task keyword (prefix rule) votes +1 for the affirmative label
word, unless a negator ("no", "denies", "without", "negative") appears
within the 3 preceding tokens, in which case the occurrence votes +1 for
the negative label word instead.  Training runs plain mini-batch gradient
descent on cross-entropy over the biases and the (token, word) weight
table, with analytic gradients; negated keyword occurrences are treated
as their own table rows so the zero-shot negation behavior stays a real,
trainable parameter.
"""

from __future__ import annotations

import abc
import math
import random
import re
from dataclasses import dataclass

from .errors import DivergenceDetected, InputTooLong
from .prompts import PromptInput
from .tasks import TaskConfig

_WORD_RX = re.compile(r"[^\W_]+")

NEGATORS = frozenset({"no", "denies", "without", "negative"})
NEGATION_WINDOW = 3


@dataclass(frozen=True)
class TrainExample:
    prompt: PromptInput
    gold_class_index: int

    def __post_init__(self):
        if self.gold_class_index < 0:
            raise ValueError("gold_class_index must be >= 0")


@dataclass(frozen=True)
class HyperParams:
    learning_rate: float
    batch_size: int
    epochs: int

    def __post_init__(self):
        if not (1e-7 <= self.learning_rate <= 1e-4):
            raise ValueError(f"learning_rate {self.learning_rate} outside [1e-7, 1e-4]")
        if self.batch_size not in (1, 2, 4):
            raise ValueError(f"batch_size {self.batch_size} not in {{1, 2, 4}}")
        if not (1 <= self.epochs <= 10):
            raise ValueError(f"epochs {self.epochs} outside 1..10")


class ScorerHandle(abc.ABC):
    """Pluggable masked-LM surface.

    Concurrency: tokenize/detokenize/score are safe to call concurrently on
    an unchanging model state; train and reset mutate state and must be
    serialized against everything else by the caller.
    """

    max_input_tokens: int
    special_overhead: int
    mask_token: str

    @abc.abstractmethod
    def tokenize(self, text: str) -> list[str]: ...

    @abc.abstractmethod
    def detokenize(self, tokens: list[str]) -> str: ...

    @abc.abstractmethod
    def score(self, prompt: PromptInput, label_word_ids: list[str]) -> list[float]: ...

    @abc.abstractmethod
    def train(self, examples: list[TrainExample], hp: HyperParams, seed: int) -> float: ...

    @abc.abstractmethod
    def reset(self) -> None: ...

    def describe(self) -> dict:
        """Stable description for report fingerprints."""
        return {
            "kind": type(self).__name__,
            "max_input_tokens": self.max_input_tokens,
            "special_overhead": self.special_overhead,
            "mask_token": self.mask_token,
        }


def _pick_word(label_words: tuple[str, ...], wanted: str, fallback_index: int) -> str:
    for w in label_words:
        if w.lower() == wanted:
            return w
    return label_words[min(fallback_index, len(label_words) - 1)]


class ToyScorer(ScorerHandle):
    """Deterministic proximity-weighted linear scorer (see module docstring)."""

    def __init__(
        self,
        task: TaskConfig,
        *,
        max_input_tokens: int = 512,
        special_overhead: int = 2,
        mask_token: str = "[MASK]",
        tau: float = 32.0,
        affirmative_word: str | None = None,
        negative_word: str | None = None,
    ):
        if tau <= 0:
            raise ValueError("tau must be > 0")
        if max_input_tokens <= special_overhead:
            raise ValueError("max_input_tokens must exceed special_overhead")
        self.task = task
        self.max_input_tokens = max_input_tokens
        self.special_overhead = special_overhead
        self.mask_token = mask_token
        self.tau = float(tau)
        self._keyword_prefixes = task.keywords.single_word_patterns()
        affirmative_word = affirmative_word or _pick_word(task.label_words, "yes", 0)
        negative_word = negative_word or _pick_word(task.label_words, "no", 1)
        self._affirm_id = self._first_piece(affirmative_word)
        self._neg_id = self._first_piece(negative_word)
        self._label_ids = tuple(self._first_piece(w) for w in task.label_words)
        # learned state: sparse deltas over the fixed zero-shot weights
        self._bias: dict[str, float] = {}
        self._delta: dict[object, dict[str, float]] = {}

    # -- tokenizer ---------------------------------------------------------

    def tokenize(self, text: str) -> list[str]:
        return _WORD_RX.findall(text.lower())

    def detokenize(self, tokens: list[str]) -> str:
        return " ".join(tokens)

    def _first_piece(self, word: str) -> str:
        pieces = self.tokenize(word)
        if not pieces:
            raise ValueError(f"word {word!r} produced no tokens")
        return pieces[0]

    # -- zero-shot weight law ---------------------------------------------

    def _is_keyword_token(self, token: str) -> bool:
        return any(token.startswith(k) for k in self._keyword_prefixes)

    def _effective_token(self, tokens, i: int):
        """Table row for position i: negated keyword hits get their own row."""
        t = tokens[i]
        if self._is_keyword_token(t):
            lo = max(0, i - NEGATION_WINDOW)
            if any(tokens[j] in NEGATORS for j in range(lo, i)):
                return ("neg", t)
        return t

    def _base_weight(self, eff, word_id: str) -> float:
        if isinstance(eff, tuple):
            return 1.0 if word_id == self._neg_id else 0.0
        if self._is_keyword_token(eff):
            return 1.0 if word_id == self._affirm_id else 0.0
        return 0.0

    def _weight(self, eff, word_id: str) -> float:
        w = self._base_weight(eff, word_id)
        delta = self._delta.get(eff)
        if delta:
            w += delta.get(word_id, 0.0)
        return w

    def _decay(self, distance: int) -> float:
        return 1.0 / (1.0 + distance / self.tau)

    def _features(self, tokens, mask_index: int) -> dict:
        """Map of effective token -> summed decay over its occurrences."""
        feats: dict = {}
        for i in range(len(tokens)):
            if i == mask_index:
                continue
            eff = self._effective_token(tokens, i)
            feats[eff] = feats.get(eff, 0.0) + self._decay(abs(i - mask_index))
        return feats

    # -- contract operations ----------------------------------------------

    def score(self, prompt: PromptInput, label_word_ids: list[str]) -> list[float]:
        tokens = prompt.tokens
        if len(tokens) + self.special_overhead > self.max_input_tokens:
            raise InputTooLong(
                f"{len(tokens)} tokens + {self.special_overhead} special > "
                f"{self.max_input_tokens}"
            )
        if not (0 <= prompt.mask_index < len(tokens)) or tokens[prompt.mask_index] != self.mask_token:
            raise ValueError("prompt mask_index does not point at the mask token")
        if sum(1 for t in tokens if t == self.mask_token) != 1:
            raise ValueError("prompt must contain exactly one mask token")
        feats = self._features(tokens, prompt.mask_index)
        return [self._score_word(feats, w) for w in label_word_ids]

    def _score_word(self, feats: dict, word_id: str) -> float:
        z = self._bias.get(word_id, 0.0)
        for eff, summed in feats.items():
            w = self._weight(eff, word_id)
            if w:
                z += w * summed
        return z

    def train(self, examples: list[TrainExample], hp: HyperParams, seed: int) -> float:
        if not examples:
            raise ValueError("train requires at least one example")
        prepared = []
        for ex in examples:
            if ex.gold_class_index >= len(self._label_ids):
                raise ValueError(
                    f"gold_class_index {ex.gold_class_index} out of range for "
                    f"{len(self._label_ids)} classes"
                )
            feats = self._features(ex.prompt.tokens, ex.prompt.mask_index)
            prepared.append((feats, ex.gold_class_index))

        rng = random.Random(seed)
        order = list(range(len(prepared)))
        lr = hp.learning_rate
        for _ in range(hp.epochs):
            rng.shuffle(order)
            for lo in range(0, len(order), hp.batch_size):
                batch = [prepared[i] for i in order[lo : lo + hp.batch_size]]
                loss, grad_b, grad_w = self._loss_and_grads(batch)
                if not math.isfinite(loss):
                    raise DivergenceDetected(f"training loss became {loss}")
                for word_id, g in grad_b.items():
                    self._bias[word_id] = self._bias.get(word_id, 0.0) - lr * g
                for (eff, word_id), g in grad_w.items():
                    row = self._delta.setdefault(eff, {})
                    row[word_id] = row.get(word_id, 0.0) - lr * g

        final, _, _ = self._loss_and_grads(prepared, grads=False)
        if not math.isfinite(final):
            raise DivergenceDetected(f"final training loss is {final}")
        return final

    def _loss_and_grads(self, batch, grads: bool = True):
        """Mean cross-entropy over the batch, plus analytic gradients.

        Gradients: with p = softmax(logits over label words) and gold word g,
        dL/dbias(v) = p_v - [v == g]; dL/dweight(eff, v) = (p_v - [v == g])
        times the summed decay of eff in that example.  Averaged over the
        batch.
        """
        n = len(batch)
        total = 0.0
        grad_b: dict[str, float] = {}
        grad_w: dict[tuple, float] = {}
        for feats, gold_pos in batch:
            logits = [self._score_word(feats, w) for w in self._label_ids]
            m = max(logits)
            exps = [math.exp(z - m) for z in logits]
            denom = sum(exps)
            probs = [e / denom for e in exps]
            total += -math.log(max(probs[gold_pos], 1e-300))
            if not grads:
                continue
            for v, word_id in enumerate(self._label_ids):
                coeff = (probs[v] - (1.0 if v == gold_pos else 0.0)) / n
                if coeff == 0.0:
                    continue
                grad_b[word_id] = grad_b.get(word_id, 0.0) + coeff
                for eff, summed in feats.items():
                    key = (eff, word_id)
                    grad_w[key] = grad_w.get(key, 0.0) + coeff * summed
        return total / n, grad_b, grad_w

    def reset(self) -> None:
        self._bias.clear()
        self._delta.clear()

    def describe(self) -> dict:
        d = super().describe()
        d.update(
            tau=self.tau,
            affirmative_id=self._affirm_id,
            negative_id=self._neg_id,
            keywords=list(self.task.keywords.patterns),
        )
        return d
