"""Task configuration: classes, prompt template, label words, keywords.

A task bundles everything the builders and the evaluation harness need to
know about one classification problem.  Built-in tasks ship as TOML files
under ``koti/configs`` and load by short name; user tasks load from a TOML
or JSON file of the same shape::

    name = "dysmenorrhea"
    classes = ["Yes", "No", "Unknown"]
    label_words = ["yes", "no", "unknown"]
    keywords = ["dysmenorrhea", "cramps", "menstrual pain", "period pain"]

    [template]
    before_mask = "dysmenorrhea:"
    after_mask = ""

Class order is meaningful: the first listed class wins verbalizer ties and,
for two-class tasks, is treated as the affirmative class when reporting the
primary metric.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .texts import KeywordSet


@dataclass(frozen=True)
class TemplateSpec:
    """Prompt template with a single mask position.

    ``mask_marker`` is display-only (it names the slot in rendered text and
    config files); the builders insert the active scorer's real mask token,
    so the marker must not occur in the surrounding template text.
    """

    text_before_mask: str
    text_after_mask: str = ""
    mask_marker: str = "[MASK]"

    def __post_init__(self):
        if not self.mask_marker:
            raise ValueError("mask_marker must be non-empty")
        if self.mask_marker in self.text_before_mask or self.mask_marker in self.text_after_mask:
            raise ValueError("template text must not contain the mask marker itself")

    def render(self) -> str:
        parts = [self.text_before_mask, self.mask_marker, self.text_after_mask]
        return " ".join(p for p in parts if p)


@dataclass(frozen=True)
class TaskConfig:
    """One classification task; immutable once constructed."""

    name: str
    classes: tuple[str, ...]
    template: TemplateSpec
    label_words: tuple[str, ...]
    keywords: KeywordSet

    def __post_init__(self):
        if not self.name:
            raise ValueError("task name must be non-empty")
        if len(self.classes) < 2:
            raise ValueError("a task needs at least two classes")
        if len(set(self.classes)) != len(self.classes):
            raise ValueError("class names must be unique")
        if len(self.label_words) != len(self.classes):
            raise ValueError(
                f"{len(self.label_words)} label words for {len(self.classes)} classes"
            )
        if len(set(self.label_words)) != len(self.label_words):
            raise ValueError("label words must be unique")
        if any(not w for w in self.label_words):
            raise ValueError("label words must be non-empty")

    def class_index(self, label: str) -> int:
        try:
            return self.classes.index(label)
        except ValueError:
            raise ValueError(f"label {label!r} is not a class of task {self.name!r}") from None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "classes": list(self.classes),
            "template": {
                "before_mask": self.template.text_before_mask,
                "after_mask": self.template.text_after_mask,
                "mask_marker": self.template.mask_marker,
            },
            "label_words": list(self.label_words),
            "keywords": list(self.keywords.patterns),
        }


def _task_from_mapping(data: dict, origin: str) -> TaskConfig:
    try:
        tmpl = data["template"]
        return TaskConfig(
            name=data["name"],
            classes=tuple(data["classes"]),
            template=TemplateSpec(
                text_before_mask=tmpl.get("before_mask", ""),
                text_after_mask=tmpl.get("after_mask", ""),
                mask_marker=tmpl.get("mask_marker", "[MASK]"),
            ),
            label_words=tuple(data["label_words"]),
            keywords=KeywordSet(tuple(data["keywords"])),
        )
    except KeyError as e:
        raise ValueError(f"task config {origin}: missing field {e.args[0]!r}") from None


def load_task_file(path: str | Path) -> TaskConfig:
    """Load a task config from a ``.toml`` or ``.json`` file."""
    path = Path(path)
    raw = path.read_bytes()
    if path.suffix.lower() == ".json":
        data = json.loads(raw.decode("utf-8"))
    else:
        data = tomllib.loads(raw.decode("utf-8"))
    return _task_from_mapping(data, str(path))


# Short names of the task configs shipped with the package.  The *-as-printed
# variants keep the keyword assignment exactly as distributed upstream, where
# the osteoarthritis and depression lists are swapped; the plain names carry
# the semantically matching lists.
BUILTIN_TASKS = (
    "dys",
    "oa",
    "dep",
    "pvd",
    "smk",
    "oa-as-printed",
    "dep-as-printed",
    "synthetic",
    "synthetic-minority",
)


def builtin_task(name: str, *, as_printed: bool = False) -> TaskConfig:
    """Load a shipped task by short name.

    ``as_printed=True`` redirects to the ``<name>-as-printed`` variant when
    one exists (only the tasks affected by the upstream keyword swap have
    one); for every other name it is a no-op.
    """
    effective = name
    if as_printed and f"{name}-as-printed" in BUILTIN_TASKS:
        effective = f"{name}-as-printed"
    if effective not in BUILTIN_TASKS:
        raise ValueError(f"unknown built-in task {name!r}; have {', '.join(BUILTIN_TASKS)}")
    ref = resources.files("koti.configs").joinpath(f"{effective}.toml")
    data = tomllib.loads(ref.read_text(encoding="utf-8"))
    return _task_from_mapping(data, f"builtin:{effective}")


def resolve_task(spec: str, *, as_printed: bool = False) -> TaskConfig:
    """Resolve ``spec`` as a built-in name first, else as a config file path."""
    if spec in BUILTIN_TASKS:
        return builtin_task(spec, as_printed=as_printed)
    path = Path(spec)
    if path.exists():
        return load_task_file(path)
    raise ValueError(f"task {spec!r} is neither a built-in name nor an existing file")
