"""Keyword-optimized template insertion toolkit.

Builds masked-LM prompt inputs for long clinical notes by placing the
prompt template next to the first keyword-bearing sentence, with
proportional truncation to the model's token budget, plus two standard
baselines, a zero-/few-shot evaluation harness, and a pluggable scorer
(deterministic toy model or out-of-process worker).
"""

from .datasets import (
    DatasetStats,
    chunk_runs,
    compute_stats,
    generate_synthetic,
    load_dataset,
    write_dataset,
)
from .errors import (
    DivergenceDetected,
    DuplicateId,
    EmptyEvaluation,
    InputTooLong,
    InsufficientClassExamples,
    InvalidSpec,
    KotiError,
    LabelWordCollision,
    NonFiniteLogit,
    ParseError,
    SampleTooLarge,
    TokenizationFailure,
    WorkerProtocolError,
)
from .evaluation import (
    DEFAULT_HP,
    EvalReport,
    RandomSearchResult,
    RunResult,
    SamplingPlan,
    TrialResult,
    evaluate,
    primary_metric_name,
    random_search,
    sample_balanced,
    sample_random,
)
from .metrics import confusion_matrix, macro_f1, per_class_prf
from .prompts import (
    BUILDERS,
    METHOD_KOTI,
    METHOD_STI_K,
    METHOD_STI_S,
    METHODS,
    PromptInput,
    TruncationRecord,
    build_koti,
    build_prompt,
    build_sti_k,
    build_sti_s,
    proportional_truncate,
)
from .scoring import (
    NEGATION_WINDOW,
    NEGATORS,
    HyperParams,
    ScorerHandle,
    ToyScorer,
    TrainExample,
)
from .tasks import BUILTIN_TASKS, TaskConfig, TemplateSpec, builtin_task, load_task_file, resolve_task
from .texts import (
    KeywordSet,
    Note,
    SentenceSpan,
    flag_sentences,
    segment_sentences,
    split_at_first_flagged,
)
from .verbalizer import Prediction, predict, resolve_label_words, stable_softmax
from .worker_client import WorkerScorer

__version__ = "0.1.0"
