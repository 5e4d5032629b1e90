import pytest

from koti import (
    KeywordSet,
    SamplingPlan,
    TaskConfig,
    TemplateSpec,
    ToyScorer,
    builtin_task,
    generate_synthetic,
)


@pytest.fixture(scope="session")
def synthetic_task():
    return builtin_task("synthetic")


@pytest.fixture(scope="session")
def minority_task():
    return builtin_task("synthetic-minority")


@pytest.fixture(scope="session")
def dys_task():
    return builtin_task("dys")


@pytest.fixture()
def toy(synthetic_task):
    return ToyScorer(synthetic_task)


@pytest.fixture(scope="session")
def ordering_corpus(synthetic_task):
    """1000-token notes, evidence at 600, contrary mention at 700 in 20%."""
    return generate_synthetic(
        synthetic_task,
        {"Yes": 34, "No": 52, "Unknown": 64},
        note_tokens=1000,
        salient_depth=600,
        seed=7,
        contrary_rate=0.2,
        contrary_depth=700,
    )


@pytest.fixture(scope="session")
def minority_corpus(minority_task):
    """Short notes, 10% minority class, no truncation pressure."""
    return generate_synthetic(
        minority_task,
        {"Yes": 68, "No": 67, "Unknown": 15},
        note_tokens=200,
        salient_depth=100,
        seed=11,
    )


def make_task(classes, words, keywords=("cramps",), before="complaint:", after=""):
    return TaskConfig(
        name="adhoc",
        classes=tuple(classes),
        template=TemplateSpec(text_before_mask=before, text_after_mask=after),
        label_words=tuple(words),
        keywords=KeywordSet(tuple(keywords)),
    )


@pytest.fixture()
def zero_shot_plan():
    return SamplingPlan(mode="balanced", size=0, runs=1, seed=0)
