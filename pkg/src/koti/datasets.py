"""Dataset loading/writing, corpus token statistics, synthetic note generation.

Datasets are flat lists of notes in JSON-lines (one object per line with
``id``/``text`` and optional ``label``) or CSV (header row, same columns).
The synthetic generator builds desk-scale stand-ins for long clinical
notes with a controllable evidence position, so truncation behavior can be
exercised without any protected data.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
from dataclasses import dataclass
from pathlib import Path
from random import Random

from .errors import DuplicateId, InvalidSpec, ParseError
from .tasks import TaskConfig
from .texts import Note, flag_sentences, segment_sentences

# ---------------------------------------------------------------------------
# loading / writing


def _note_from_mapping(obj: dict, line: int, origin: str) -> Note:
    if not isinstance(obj, dict):
        raise ParseError(f"{origin} line {line}: expected an object, got {type(obj).__name__}", line)
    for field in ("id", "text"):
        if field not in obj or obj[field] is None:
            raise ParseError(f"{origin} line {line}: missing field {field!r}", line)
        if not isinstance(obj[field], str):
            raise ParseError(f"{origin} line {line}: field {field!r} must be a string", line)
    label = obj.get("label")
    if label is not None and not isinstance(label, str):
        raise ParseError(f"{origin} line {line}: field 'label' must be a string", line)
    if not obj["id"]:
        raise ParseError(f"{origin} line {line}: empty id", line)
    return Note(id=obj["id"], text=obj["text"], label=label or None)


def load_dataset(path: str | Path, format: str | None = None) -> list[Note]:
    """Load notes from a ``.jsonl`` or ``.csv`` file; ids must be unique."""
    path = Path(path)
    fmt = format or {".jsonl": "jsonl", ".csv": "csv"}.get(path.suffix.lower())
    if fmt not in ("jsonl", "csv"):
        raise ValueError(f"cannot infer format of {path.name!r}; pass format='jsonl' or 'csv'")
    notes: list[Note] = []
    seen: set[str] = set()
    origin = path.name
    with path.open("r", encoding="utf-8", newline="") as fh:
        if fmt == "jsonl":
            for lineno, raw in enumerate(fh, 1):
                if not raw.strip():
                    continue
                try:
                    obj = json.loads(raw)
                except json.JSONDecodeError as e:
                    raise ParseError(f"{origin} line {lineno}: invalid JSON ({e.msg})", lineno) from None
                note = _note_from_mapping(obj, lineno, origin)
                if note.id in seen:
                    raise DuplicateId(f"{origin} line {lineno}: duplicate id {note.id!r}")
                seen.add(note.id)
                notes.append(note)
        else:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                return []
            missing = {"id", "text"} - set(reader.fieldnames)
            if missing:
                raise ParseError(f"{origin}: header lacks columns {sorted(missing)}", 1)
            for row in reader:
                lineno = reader.line_num
                obj = {
                    "id": row.get("id"),
                    "text": row.get("text"),
                    "label": row.get("label") or None,
                }
                note = _note_from_mapping(obj, lineno, origin)
                if note.id in seen:
                    raise DuplicateId(f"{origin} line {lineno}: duplicate id {note.id!r}")
                seen.add(note.id)
                notes.append(note)
    return notes


def write_dataset(notes: list[Note], path: str | Path, format: str | None = None) -> None:
    path = Path(path)
    fmt = format or {".jsonl": "jsonl", ".csv": "csv"}.get(path.suffix.lower())
    if fmt not in ("jsonl", "csv"):
        raise ValueError(f"cannot infer format of {path.name!r}; pass format='jsonl' or 'csv'")
    with path.open("w", encoding="utf-8", newline="") as fh:
        if fmt == "jsonl":
            for n in notes:
                obj: dict = {"id": n.id, "text": n.text}
                if n.label is not None:
                    obj["label"] = n.label
                fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
        else:
            writer = csv.writer(fh)
            writer.writerow(["id", "text", "label"])
            for n in notes:
                writer.writerow([n.id, n.text, n.label or ""])


# ---------------------------------------------------------------------------
# corpus statistics


@dataclass(frozen=True)
class DatasetStats:
    mean_tokens: float
    sd_tokens: float          # population standard deviation
    proportion_over_limit: float
    mean_chunk_runs: float
    keyword_hit_rate: float


def chunk_runs(n_tokens: int, limit: int) -> int:
    """Inference runs needed when the note is split into non-overlapping chunks."""
    if limit <= 0:
        raise ValueError("limit must be positive")
    return max(1, math.ceil(n_tokens / limit))


def compute_stats(dataset: list[Note], task: TaskConfig, scorer, limit: int = 512) -> DatasetStats:
    if not dataset:
        return DatasetStats(0.0, 0.0, 0.0, 0.0, 0.0)
    counts = [len(scorer.tokenize(n.text)) for n in dataset]
    hits = 0
    for n in dataset:
        spans = flag_sentences(n.text, segment_sentences(n.text), task.keywords)
        if any(s.flagged for s in spans):
            hits += 1
    n_notes = len(dataset)
    return DatasetStats(
        mean_tokens=statistics.fmean(counts),
        sd_tokens=statistics.pstdev(counts),
        proportion_over_limit=sum(1 for c in counts if c > limit) / n_notes,
        mean_chunk_runs=statistics.fmean(chunk_runs(c, limit) for c in counts),
        keyword_hit_rate=hits / n_notes,
    )


# ---------------------------------------------------------------------------
# synthetic corpus generator

# Neutral filler vocabulary for synthetic notes.  Kept free of negators and
# of anything resembling evidence; words that would prefix-match a task
# keyword are filtered out again at generation time.
_FILLER_WORDS = (
    "the", "chart", "was", "reviewed", "during", "routine", "follow", "up",
    "visit", "and", "overall", "status", "remained", "stable", "with", "plan",
    "to", "continue", "current", "care", "team", "discussed", "ongoing",
    "progress", "at", "home", "activities", "were", "unchanged", "sleep",
    "appetite", "energy", "levels", "stayed", "within", "usual", "range",
    "family", "support", "remains", "good", "medication", "list", "updated",
)

_ROLE_AFFIRM = "affirm"
_ROLE_NEGATE = "negate"
_ROLE_NONE = "none"

_EVIDENCE_SENTENCE_TOKENS = 3  # "patient reports|denies <keyword>."


def _class_role(class_name: str) -> str:
    low = class_name.lower()
    if low == "yes":
        return _ROLE_AFFIRM
    if low == "no":
        return _ROLE_NEGATE
    return _ROLE_NONE


def generate_synthetic(
    task: TaskConfig,
    class_counts: dict[str, int],
    *,
    note_tokens: int,
    salient_depth: int,
    seed: int,
    contrary_rate: float = 0.0,
    contrary_depth: int | None = None,
) -> list[Note]:
    """Generate labeled synthetic notes for ``task``.

    Every note is exactly ``note_tokens`` whitespace words long.  Classes
    named "yes"/"no" (case-insensitive) get an evidence sentence "patient
    reports <keyword>." / "patient denies <keyword>." whose keyword lands at
    token position ``salient_depth + 2``; other classes get pure filler.

    ``contrary_rate`` optionally plants an opposite-polarity mention deeper
    in the note (at ``contrary_depth``) in a fixed fraction of the evidence
    notes of each class: real notes mention a finding more than once, and
    the later mention rewards prompts that keep their mask near the first,
    label-defining one.  The first flagged sentence still determines the
    label, so label fidelity under keyword re-derivation is preserved.
    """
    counts = dict(class_counts)
    for cls, cnt in counts.items():
        if cls not in task.classes:
            raise InvalidSpec(f"count given for {cls!r}, not a class of task {task.name!r}")
        if not isinstance(cnt, int) or cnt < 0:
            raise InvalidSpec(f"count for {cls!r} must be a non-negative integer")
    if note_tokens < 1:
        raise InvalidSpec("note_tokens must be >= 1")
    if not 0.0 <= contrary_rate <= 1.0:
        raise InvalidSpec("contrary_rate must be in [0, 1]")

    evidence_requested = any(
        cnt > 0 and _class_role(cls) != _ROLE_NONE for cls, cnt in counts.items()
    )
    keywords = task.keywords.single_word_patterns()
    if evidence_requested:
        if not keywords:
            raise InvalidSpec(f"task {task.name!r} has no single-word keyword to plant")
        if salient_depth < 0 or salient_depth + _EVIDENCE_SENTENCE_TOKENS > note_tokens:
            raise InvalidSpec(
                f"salient_depth {salient_depth} does not leave room for the evidence "
                f"sentence in {note_tokens}-token notes"
            )
        if contrary_rate > 0.0:
            if contrary_depth is None:
                raise InvalidSpec("contrary_rate > 0 requires contrary_depth")
            if contrary_depth < salient_depth + _EVIDENCE_SENTENCE_TOKENS:
                raise InvalidSpec("contrary_depth must lie after the salient sentence")
            if contrary_depth + _EVIDENCE_SENTENCE_TOKENS > note_tokens:
                raise InvalidSpec(
                    f"contrary_depth {contrary_depth} does not fit in {note_tokens}-token notes"
                )

    rx = task.keywords.regex()
    pool = [w for w in _FILLER_WORDS if not rx.search(w) and w not in ("patient", "reports", "denies")]
    if not pool:
        raise InvalidSpec("no filler vocabulary survives the task's keyword filter")

    rng = Random(seed)
    notes: list[Note] = []
    serial = 0
    for cls in task.classes:  # deterministic class order
        cnt = counts.get(cls, 0)
        role = _class_role(cls)
        n_contrary = int(cnt * contrary_rate + 0.5) if role != _ROLE_NONE else 0
        contrary_picks = set(rng.sample(range(cnt), n_contrary)) if n_contrary else set()
        for j in range(cnt):
            words = _synthesize_words(
                rng,
                pool,
                keywords,
                role,
                note_tokens,
                salient_depth,
                contrary_depth if j in contrary_picks else None,
            )
            notes.append(Note(id=f"{task.name}-{serial:04d}", text=" ".join(words), label=cls))
            serial += 1
    rng.shuffle(notes)
    return notes


def _synthesize_words(
    rng: Random,
    pool: list[str],
    keywords: tuple[str, ...],
    role: str,
    note_tokens: int,
    salient_depth: int,
    contrary_depth: int | None,
) -> list[str]:
    words: list[str] = []

    def fill_to(target: int) -> None:
        while len(words) < target:
            remaining = target - len(words)
            k = min(remaining, rng.randint(6, 12))
            sentence = [rng.choice(pool) for _ in range(k)]
            sentence[-1] += "."
            words.extend(sentence)

    def evidence(verb: str) -> None:
        words.extend(["patient", verb, rng.choice(keywords) + "."])

    if role == _ROLE_NONE:
        fill_to(note_tokens)
        return words

    fill_to(salient_depth)
    evidence("reports" if role == _ROLE_AFFIRM else "denies")
    if contrary_depth is not None:
        fill_to(contrary_depth)
        evidence("denies" if role == _ROLE_AFFIRM else "reports")
    fill_to(note_tokens)
    return words
