"""Zero-shot and few-shot evaluation protocols with repeated runs.

One dataset goes in; each run re-seeds the sampler, resets the scorer,
optionally fine-tunes on the sampled train split, and scores the
remainder.  Aggregates report the mean and standard error of the primary
metric over the runs that completed; diverged runs stay in the report as
failures and mark the aggregate partial instead of silently shrinking the
denominator.
"""

from __future__ import annotations

import hashlib
import json
import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from random import Random

from .errors import DivergenceDetected, InsufficientClassExamples, SampleTooLarge
from .metrics import confusion_matrix, macro_f1, per_class_prf
from .prompts import BUILDERS, METHODS
from .scoring import HyperParams, ScorerHandle, TrainExample
from .tasks import TaskConfig
from .texts import Note
from .verbalizer import predict, resolve_label_words

# Used for few-shot runs when the caller provides no tuned hyper-parameters.
DEFAULT_HP = HyperParams(learning_rate=2e-5, batch_size=1, epochs=5)


@dataclass(frozen=True)
class SamplingPlan:
    """Few-shot sampling specification: balanced k-per-class or random n-total."""

    mode: str                 # "balanced" | "random"
    size: int                 # k (balanced) or n (random); 0 = zero-shot
    runs: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("balanced", "random"):
            raise ValueError(f"plan mode must be 'balanced' or 'random', got {self.mode!r}")
        if self.size < 0:
            raise ValueError("plan size must be >= 0")
        if self.runs < 1:
            raise ValueError("plan needs at least one run")

    @classmethod
    def parse(cls, text: str, runs: int = 10, seed: int = 0) -> "SamplingPlan":
        """Parse the CLI syntax ``balanced:<k>`` / ``random:<n>``."""
        mode, sep, size = text.partition(":")
        if not sep or not size.isdigit():
            raise ValueError(f"bad plan {text!r}; expected balanced:<k> or random:<n>")
        return cls(mode=mode, size=int(size), runs=runs, seed=seed)

    def to_dict(self) -> dict:
        return {"mode": self.mode, "size": self.size, "runs": self.runs, "seed": self.seed}


def sample_balanced(
    dataset: list[Note], k: int, seed: int, classes: tuple[str, ...]
) -> tuple[list[Note], list[Note]]:
    """Draw exactly k notes per class without replacement; rest is the eval split."""
    if k == 0:
        return [], list(dataset)
    by_class: dict[str, list[int]] = {c: [] for c in classes}
    for i, note in enumerate(dataset):
        if note.label in by_class:
            by_class[note.label].append(i)
    rng = Random(seed)
    chosen: list[int] = []
    for c in classes:
        pool = by_class[c]
        if len(pool) < k:
            raise InsufficientClassExamples(
                f"class {c!r} has {len(pool)} labeled examples, need {k}"
            )
        chosen.extend(rng.sample(pool, k))
    picked = set(chosen)
    train = [dataset[i] for i in sorted(picked)]
    evalset = [n for i, n in enumerate(dataset) if i not in picked]
    return train, evalset


def sample_random(dataset: list[Note], n: int, seed: int) -> tuple[list[Note], list[Note]]:
    """Draw n notes uniformly without replacement; rest is the eval split."""
    if n > len(dataset):
        raise SampleTooLarge(f"cannot draw {n} from {len(dataset)} notes")
    if n == 0:
        return [], list(dataset)
    rng = Random(seed)
    picked = set(rng.sample(range(len(dataset)), n))
    train = [dataset[i] for i in sorted(picked)]
    evalset = [n_ for i, n_ in enumerate(dataset) if i not in picked]
    return train, evalset


@dataclass
class RunResult:
    """Outcome of one evaluation run.

    status is "ok" (metrics present), "degenerate" (empty eval split), or
    "failed" (training diverged; error carries the message).
    """

    run_index: int
    seed: int
    status: str
    train_size: int
    eval_size: int
    fallback_rate: float
    confusion: list[list[int]] | None = None
    per_class: dict[str, dict[str, float]] | None = None
    primary_metric: float | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "run_index": self.run_index,
            "seed": self.seed,
            "status": self.status,
            "train_size": self.train_size,
            "eval_size": self.eval_size,
            "fallback_rate": self.fallback_rate,
            "confusion": self.confusion,
            "per_class": self.per_class,
            "primary_metric": self.primary_metric,
            "error": self.error,
        }


@dataclass
class EvalReport:
    task_name: str
    method: str
    plan: SamplingPlan
    scorer: dict
    hyperparams: dict | None
    primary_metric_name: str
    runs: list[RunResult] = field(default_factory=list)
    mean_primary: float | None = None
    stderr_primary: float | None = None
    fallback_rate: float = 0.0
    partial: bool = False
    config_fingerprint: str = ""

    def to_dict(self) -> dict:
        return {
            "task": self.task_name,
            "method": self.method,
            "plan": self.plan.to_dict(),
            "scorer": self.scorer,
            "hyperparams": self.hyperparams,
            "primary_metric_name": self.primary_metric_name,
            "runs": [r.to_dict() for r in self.runs],
            "aggregate": {
                "mean_primary": self.mean_primary,
                "stderr_primary": self.stderr_primary,
                "runs_ok": sum(1 for r in self.runs if r.status == "ok"),
                "runs_total": len(self.runs),
                "partial": self.partial,
                "fallback_rate": self.fallback_rate,
            },
            "config_fingerprint": self.config_fingerprint,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")


def primary_metric_name(task: TaskConfig, *, binary_macro: bool = False) -> str:
    """Two-class tasks report the first class's F1 unless binary_macro is set."""
    if len(task.classes) == 2 and not binary_macro:
        return f"f1:{task.classes[0]}"
    return "macro_f1"


def _fingerprint(task: TaskConfig, method: str, plan: SamplingPlan, scorer_desc: dict,
                 hp: HyperParams | None, binary_macro: bool) -> str:
    payload = {
        "task": task.to_dict(),
        "method": method,
        "plan": plan.to_dict(),
        "scorer": scorer_desc,
        "hyperparams": None if hp is None else vars(hp),
        "binary_macro": binary_macro,
    }
    blob = json.dumps(payload, sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def evaluate(
    task: TaskConfig,
    dataset: list[Note],
    method: str,
    scorer: ScorerHandle,
    plan: SamplingPlan,
    hp: HyperParams | None = None,
    *,
    binary_macro: bool = False,
) -> EvalReport:
    """Run the repeated sample/train/score protocol and aggregate.

    Zero-shot plans (size 0) never call train.  Few-shot plans use ``hp``
    or, when None, DEFAULT_HP.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    for note in dataset:
        if note.label is None:
            raise ValueError(f"note {note.id!r} has no label; evaluation needs labeled data")
        if note.label not in task.classes:
            raise ValueError(f"note {note.id!r} label {note.label!r} is not a class of {task.name!r}")

    build = BUILDERS[method]
    label_ids = resolve_label_words(task, scorer)
    metric_name = primary_metric_name(task, binary_macro=binary_macro)
    report = EvalReport(
        task_name=task.name,
        method=method,
        plan=plan,
        scorer=scorer.describe(),
        hyperparams=None if plan.size == 0 else vars(hp or DEFAULT_HP),
        primary_metric_name=metric_name,
        config_fingerprint=_fingerprint(task, method, plan, scorer.describe(),
                                        None if plan.size == 0 else (hp or DEFAULT_HP),
                                        binary_macro),
    )

    for r in range(plan.runs):
        run_seed = plan.seed + r
        scorer.reset()
        if plan.mode == "balanced":
            train, evalset = sample_balanced(dataset, plan.size, run_seed, task.classes)
        else:
            train, evalset = sample_random(dataset, plan.size, run_seed)

        built = 0
        fallbacks = 0

        def build_counted(note: Note):
            nonlocal built, fallbacks
            p = build(note, task, scorer)
            built += 1
            fallbacks += int(p.fallback_used)
            return p

        if train:
            examples = [
                TrainExample(build_counted(n), task.class_index(n.label)) for n in train
            ]
            try:
                scorer.train(examples, hp or DEFAULT_HP, run_seed)
            except DivergenceDetected as e:
                report.runs.append(RunResult(
                    run_index=r, seed=run_seed, status="failed",
                    train_size=len(train), eval_size=len(evalset),
                    fallback_rate=fallbacks / built if built else 0.0,
                    error=str(e),
                ))
                continue

        if not evalset:
            report.runs.append(RunResult(
                run_index=r, seed=run_seed, status="degenerate",
                train_size=len(train), eval_size=0,
                fallback_rate=fallbacks / built if built else 0.0,
            ))
            continue

        golds: list[int] = []
        preds: list[int] = []
        for note in evalset:
            prompt = build_counted(note)
            logits = scorer.score(prompt, label_ids)
            golds.append(task.class_index(note.label))
            preds.append(predict(logits).class_index)

        confusion = confusion_matrix(golds, preds, len(task.classes))
        prf = per_class_prf(confusion)
        per_class = {cls: prf[i] for i, cls in enumerate(task.classes)}
        if metric_name == "macro_f1":
            primary = macro_f1(confusion)
        else:
            primary = prf[0]["f1"]
        report.runs.append(RunResult(
            run_index=r, seed=run_seed, status="ok",
            train_size=len(train), eval_size=len(evalset),
            fallback_rate=fallbacks / built if built else 0.0,
            confusion=confusion, per_class=per_class, primary_metric=primary,
        ))

    ok = [r for r in report.runs if r.status == "ok"]
    report.partial = len(ok) != len(report.runs)
    if ok:
        values = [r.primary_metric for r in ok]
        report.mean_primary = statistics.fmean(values)
        report.stderr_primary = (
            statistics.stdev(values) / math.sqrt(len(values)) if len(values) > 1 else 0.0
        )
        report.fallback_rate = statistics.fmean(r.fallback_rate for r in ok)
    return report


@dataclass(frozen=True)
class TrialResult:
    trial_index: int
    hyperparams: HyperParams
    mean_primary: float | None
    stderr_primary: float | None
    partial: bool

    def to_dict(self) -> dict:
        return {
            "trial_index": self.trial_index,
            "hyperparams": vars(self.hyperparams),
            "mean_primary": self.mean_primary,
            "stderr_primary": self.stderr_primary,
            "partial": self.partial,
        }


@dataclass
class RandomSearchResult:
    best: HyperParams
    trials: list[TrialResult]


def random_search(
    task: TaskConfig,
    dataset: list[Note],
    method: str,
    scorer: ScorerHandle,
    plan: SamplingPlan,
    trials: int = 10,
    seed: int = 0,
    *,
    binary_macro: bool = False,
) -> RandomSearchResult:
    """Uniform random search over the training hyper-parameter space.

    Draws learning rate from Uniform[1e-7, 1e-4] (literally uniform, not
    log-uniform), batch size from {1, 2, 4}, epochs from 1..10.  The trial
    with the highest mean primary metric wins; exact ties go to the lower
    learning rate.  Trials whose runs all failed rank below everything.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if plan.size == 0:
        raise ValueError("random_search needs a few-shot plan (size > 0)")
    rng = Random(seed)
    results: list[TrialResult] = []
    for t in range(trials):
        hp = HyperParams(
            learning_rate=rng.uniform(1e-7, 1e-4),
            batch_size=rng.choice([1, 2, 4]),
            epochs=rng.randint(1, 10),
        )
        report = evaluate(task, dataset, method, scorer, plan, hp, binary_macro=binary_macro)
        results.append(TrialResult(
            trial_index=t,
            hyperparams=hp,
            mean_primary=report.mean_primary,
            stderr_primary=report.stderr_primary,
            partial=report.partial,
        ))
    best = max(
        results,
        key=lambda tr: (
            tr.mean_primary if tr.mean_primary is not None else float("-inf"),
            -tr.hyperparams.learning_rate,
        ),
    )
    return RandomSearchResult(best=best.hyperparams, trials=results)
