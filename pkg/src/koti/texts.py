"""Sentence segmentation and keyword flagging for clinical notes.

Clinical notes are messy: headers glued to prose, list fragments, line
breaks in the middle of a thought.  The segmenter here is deliberately
rule-based and cheap so that downstream position arithmetic stays exact:

* a sentence ends after ``.``, ``!``, ``?`` or ``;`` when the terminator is
  immediately followed by whitespace (the terminator stays with the left
  sentence), and at every newline;
* leading/trailing whitespace is trimmed from each span and empty fragments
  are dropped, so spans never overlap and sit in document order.

Keyword matching is case-insensitive and prefix-style at word starts:
``smok`` hits ``smoker`` and ``smoking`` but not ``nonsmoker``.  Multi-word
patterns match across arbitrary whitespace.
"""

from __future__ import annotations

import functools
import re
from dataclasses import dataclass, replace

_TERMINATORS = ".!?;"


@dataclass(frozen=True)
class Note:
    """One clinical note; ``label`` is optional for inference-only data."""

    id: str
    text: str
    label: str | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("note id must be a non-empty string")


@dataclass(frozen=True)
class SentenceSpan:
    """Half-open character span [start, end) of one sentence of the note."""

    start: int
    end: int
    flagged: bool = False

    def __post_init__(self):
        if self.start < 0 or self.end <= self.start:
            raise ValueError(f"bad span [{self.start}, {self.end})")

    def text_of(self, note_text: str) -> str:
        return note_text[self.start : self.end]


@dataclass(frozen=True)
class KeywordSet:
    """Normalized keyword patterns: lowercased, inner whitespace collapsed."""

    patterns: tuple[str, ...]

    def __post_init__(self):
        normed = tuple(" ".join(p.lower().split()) for p in self.patterns)
        if not normed:
            raise ValueError("keyword set must contain at least one pattern")
        if any(not p for p in normed):
            raise ValueError("keyword patterns must be non-empty")
        if len(set(normed)) != len(normed):
            raise ValueError("keyword patterns must be unique after normalization")
        object.__setattr__(self, "patterns", normed)

    def regex(self) -> re.Pattern[str]:
        return _compile_patterns(self.patterns)

    def single_word_patterns(self) -> tuple[str, ...]:
        return tuple(p for p in self.patterns if " " not in p)


@functools.lru_cache(maxsize=128)
def _compile_patterns(patterns: tuple[str, ...]) -> re.Pattern[str]:
    # (?<!\w) anchors the match at a word start without consuming anything;
    # no trailing anchor, so patterns match as prefixes of longer words.
    parts = []
    for pat in patterns:
        words = pat.split()
        parts.append(r"(?<!\w)" + r"\s+".join(re.escape(w) for w in words))
    return re.compile("|".join(parts), re.IGNORECASE)


def segment_sentences(text: str) -> list[SentenceSpan]:
    """Split ``text`` into ordered, non-overlapping sentence spans.

    Spans cover every non-whitespace character exactly once; whitespace-only
    stretches between sentences belong to no span.
    """
    spans: list[SentenceSpan] = []

    def emit(lo: int, hi: int) -> None:
        while lo < hi and text[lo].isspace():
            lo += 1
        while hi > lo and text[hi - 1].isspace():
            hi -= 1
        if lo < hi:
            spans.append(SentenceSpan(lo, hi))

    start = 0
    n = len(text)
    for i, ch in enumerate(text):
        if ch == "\n":
            emit(start, i)
            start = i + 1
        elif ch in _TERMINATORS and i + 1 < n and text[i + 1].isspace():
            emit(start, i + 1)
            start = i + 1
    emit(start, n)
    return spans


def flag_sentences(
    text: str, spans: list[SentenceSpan], keywords: KeywordSet
) -> list[SentenceSpan]:
    """Return the spans with ``flagged`` set where the sentence matches a keyword."""
    rx = keywords.regex()
    return [replace(s, flagged=rx.search(s.text_of(text)) is not None) for s in spans]


def split_at_first_flagged(text: str, keywords: KeywordSet) -> tuple[str, str] | None:
    """Split the note right after the first keyword-bearing sentence.

    Returns ``(text_a, text_b)`` with ``text_a + text_b == text`` exactly
    (the split point is the untrimmed character offset, so no whitespace is
    lost), or None when no sentence matches.
    """
    spans = flag_sentences(text, segment_sentences(text), keywords)
    for s in spans:
        if s.flagged:
            return text[: s.end], text[s.end :]
    return None
