import sys
from pathlib import Path

import pytest

from koti import (
    DivergenceDetected,
    HyperParams,
    InputTooLong,
    PromptInput,
    TruncationRecord,
    TrainExample,
    WorkerProtocolError,
    WorkerScorer,
)

from conftest import make_task

STUB = Path(__file__).parent / "stub_worker.py"


def stub_cmd(mode: str) -> list[str]:
    return [sys.executable, str(STUB), mode]


def make_prompt(tokens, mask_index):
    return PromptInput(tuple(tokens), mask_index, "koti", TruncationRecord(0, 0, 16))


@pytest.fixture()
def ok_worker():
    w = WorkerScorer(stub_cmd("ok"))
    yield w
    w.close()


class TestHandshake:
    def test_capacity_fields(self, ok_worker):
        assert ok_worker.max_input_tokens == 32
        assert ok_worker.special_overhead == 2
        assert ok_worker.mask_token == "[MASK]"

    def test_missing_field_rejected(self):
        with pytest.raises(WorkerProtocolError, match="max_input_tokens"):
            WorkerScorer(stub_cmd("bad-hello"))

    def test_unlaunchable_command(self):
        with pytest.raises(WorkerProtocolError, match="failed to launch"):
            WorkerScorer(["/nonexistent/worker-binary"])

    def test_command_string_is_split(self):
        w = WorkerScorer(f"{sys.executable} {STUB} ok")
        try:
            assert w.max_input_tokens == 32
        finally:
            w.close()


class TestOperations:
    def test_tokenize_detokenize(self, ok_worker):
        assert ok_worker.tokenize("a b c") == ["a", "b", "c"]
        assert ok_worker.detokenize(["a", "b"]) == "a b"

    def test_score_round_trip(self, ok_worker):
        p = make_prompt(["yes", "yes", "[MASK]"], 2)
        assert ok_worker.score(p, ["yes", "no"]) == [2.0, 0.0]

    def test_train_requires_task(self, ok_worker):
        ex = TrainExample(make_prompt(["yes", "[MASK]"], 1), 0)
        with pytest.raises(ValueError, match="task"):
            ok_worker.train([ex], HyperParams(1e-5, 1, 1), seed=0)

    def test_train_reset_cycle(self):
        task = make_task(("A", "B"), ("yes", "no"))
        w = WorkerScorer(stub_cmd("ok"), task=task)
        try:
            p = make_prompt(["yes", "[MASK]"], 1)
            base = w.score(p, ["yes", "no"])
            loss = w.train([TrainExample(p, 0)], HyperParams(1e-5, 1, 1), seed=0)
            assert loss == 0.5
            assert w.score(p, ["yes", "no"]) != base
            w.reset()
            assert w.score(p, ["yes", "no"]) == base
        finally:
            w.close()

    def test_describe_names_command(self, ok_worker):
        assert ok_worker.describe()["command"][-1] == "ok"


class TestErrorSurface:
    def test_error_codes_map_to_scorer_errors(self):
        w = WorkerScorer(stub_cmd("error-codes"), task=make_task(("A", "B"), ("yes", "no")))
        try:
            p = make_prompt(["yes", "[MASK]"], 1)
            with pytest.raises(InputTooLong):
                w.score(p, ["yes", "no"])
            with pytest.raises(DivergenceDetected):
                w.train([TrainExample(p, 0)], HyperParams(1e-5, 1, 1), seed=0)
        finally:
            w.close()

    def test_garbage_reply(self):
        w = WorkerScorer(stub_cmd("garbage"))
        try:
            with pytest.raises(WorkerProtocolError, match="invalid JSON"):
                w.tokenize("x")
        finally:
            w.close()

    def test_worker_death_detected(self):
        w = WorkerScorer(stub_cmd("die"))
        with pytest.raises(WorkerProtocolError):
            w.tokenize("x")
        w.close()

    def test_wrong_reply_type(self):
        w = WorkerScorer(stub_cmd("wrong-type"))
        try:
            with pytest.raises(WorkerProtocolError, match="logits"):
                w.score(make_prompt(["a", "[MASK]"], 1), ["yes", "no"])
        finally:
            w.close()

    def test_nonfinite_logits_rejected(self):
        w = WorkerScorer(stub_cmd("nonfinite"))
        try:
            with pytest.raises(WorkerProtocolError, match="non-finite"):
                w.score(make_prompt(["a", "[MASK]"], 1), ["yes", "no"])
        finally:
            w.close()

    def test_calls_after_close_fail_cleanly(self, ok_worker):
        ok_worker.close()
        with pytest.raises(WorkerProtocolError, match="not running"):
            ok_worker.tokenize("x")


class TestLifecycle:
    def test_context_manager_closes(self):
        with WorkerScorer(stub_cmd("ok")) as w:
            proc = w._proc
            assert w.tokenize("a") == ["a"]
        assert proc.poll() is not None
