"""Prompt construction: template insertion methods and budget truncation.

Three builders share one token budget rule.  With a scorer capacity of
``max_input_tokens`` (which includes ``special_overhead`` reserved tokens)
and a template of T tokens plus one mask, the note text gets a budget of
``max_input_tokens - special_overhead - T - 1`` tokens.

* keyword insertion (``koti``): split the note after the first
  keyword-bearing sentence, truncate both sides proportionally, and place
  the template between them.  Notes with no keyword hit fall back to the
  standard layout with ``fallback_used`` set.
* keyword chunk (``sti-k``): identical kept note tokens, template appended
  at the end instead.
* standard chunk (``sti-s``): the note tail-truncated, template appended.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .tasks import TaskConfig
from .texts import Note, split_at_first_flagged

METHOD_KOTI = "koti"
METHOD_STI_K = "sti-k"
METHOD_STI_S = "sti-s"
METHODS = (METHOD_KOTI, METHOD_STI_K, METHOD_STI_S)


@dataclass(frozen=True)
class TruncationRecord:
    """How many note tokens were dropped, and the budget they had to fit."""

    removed_head_a: int
    removed_tail_b: int
    budget: int


@dataclass(frozen=True)
class PromptInput:
    """A fully built model input: tokens with exactly one mask."""

    tokens: tuple[str, ...]
    mask_index: int
    method: str
    truncation: TruncationRecord
    fallback_used: bool = False


def proportional_truncate(
    tokens_a: list[str], tokens_b: list[str], budget: int
) -> tuple[list[str], list[str], TruncationRecord]:
    """Fit two sub-chunks into ``budget`` tokens, sharing the cut proportionally.

    Head tokens come off ``tokens_a`` and tail tokens off ``tokens_b``; the
    side with more tokens loses proportionally more (round half up on a's
    share), clamped so neither side is cut below empty.  The mask-adjacent
    ends (tail of a, head of b) are always preserved.
    """
    if budget < 0:
        raise ValueError("budget must be >= 0")
    len_a, len_b = len(tokens_a), len(tokens_b)
    overflow = len_a + len_b - budget
    if overflow <= 0:
        return list(tokens_a), list(tokens_b), TruncationRecord(0, 0, budget)
    total = len_a + len_b
    # round-half-up of overflow * len_a / total, in exact integer arithmetic
    share_a = (2 * overflow * len_a + total) // (2 * total)
    removed_a = min(max(share_a, overflow - len_b), len_a)
    removed_b = overflow - removed_a
    kept_a = list(tokens_a[removed_a:])
    kept_b = list(tokens_b[: len_b - removed_b])
    return kept_a, kept_b, TruncationRecord(removed_a, removed_b, budget)


def _template_parts(task: TaskConfig, scorer) -> tuple[list[str], list[str]]:
    before = scorer.tokenize(task.template.text_before_mask)
    after = scorer.tokenize(task.template.text_after_mask)
    return before, after


def _note_budget(scorer, template_len: int) -> int:
    budget = scorer.max_input_tokens - scorer.special_overhead - template_len
    if budget < 0:
        raise ValueError(
            f"scorer capacity {scorer.max_input_tokens} cannot fit the template "
            f"({template_len} tokens) plus {scorer.special_overhead} special tokens"
        )
    return budget


def build_sti_s(note: Note, task: TaskConfig, scorer) -> PromptInput:
    """Standard chunk: note tail-truncated to budget, template appended."""
    before, after = _template_parts(task, scorer)
    budget = _note_budget(scorer, len(before) + 1 + len(after))
    tokens = scorer.tokenize(note.text)
    removed = max(0, len(tokens) - budget)
    kept = tokens[: len(tokens) - removed] if removed else tokens
    seq = (*kept, *before, scorer.mask_token, *after)
    return PromptInput(
        tokens=seq,
        mask_index=len(kept) + len(before),
        method=METHOD_STI_S,
        truncation=TruncationRecord(0, removed, budget),
    )


def _split_note(note: Note, task: TaskConfig, scorer):
    pair = split_at_first_flagged(note.text, task.keywords)
    if pair is None:
        return None
    text_a, text_b = pair
    return scorer.tokenize(text_a), scorer.tokenize(text_b)


def build_koti(note: Note, task: TaskConfig, scorer) -> PromptInput:
    """Keyword insertion: template sits right after the first flagged sentence."""
    before, after = _template_parts(task, scorer)
    budget = _note_budget(scorer, len(before) + 1 + len(after))
    split = _split_note(note, task, scorer)
    if split is None:
        base = build_sti_s(note, task, scorer)
        return replace(base, method=METHOD_KOTI, fallback_used=True)
    kept_a, kept_b, record = proportional_truncate(split[0], split[1], budget)
    seq = (*kept_a, *before, scorer.mask_token, *after, *kept_b)
    return PromptInput(
        tokens=seq,
        mask_index=len(kept_a) + len(before),
        method=METHOD_KOTI,
        truncation=record,
    )


def build_sti_k(note: Note, task: TaskConfig, scorer) -> PromptInput:
    """Keyword chunk: same kept note tokens as koti, template appended at the end."""
    before, after = _template_parts(task, scorer)
    budget = _note_budget(scorer, len(before) + 1 + len(after))
    split = _split_note(note, task, scorer)
    if split is None:
        base = build_sti_s(note, task, scorer)
        return replace(base, method=METHOD_STI_K, fallback_used=True)
    kept_a, kept_b, record = proportional_truncate(split[0], split[1], budget)
    seq = (*kept_a, *kept_b, *before, scorer.mask_token, *after)
    return PromptInput(
        tokens=seq,
        mask_index=len(kept_a) + len(kept_b) + len(before),
        method=METHOD_STI_K,
        truncation=record,
    )


BUILDERS = {
    METHOD_KOTI: build_koti,
    METHOD_STI_K: build_sti_k,
    METHOD_STI_S: build_sti_s,
}


def build_prompt(method: str, note: Note, task: TaskConfig, scorer) -> PromptInput:
    try:
        builder = BUILDERS[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}") from None
    return builder(note, task, scorer)
