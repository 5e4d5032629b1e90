"""Client for an out-of-process masked-LM worker.

The worker speaks UTF-8 JSON lines over its standard input/output, one
object per line.  The client performs the ``hello`` handshake at
construction to learn the model's capacity, then exposes the standard
scorer surface.  All traffic is serialized on one lock; any malformed
reply, worker death, or reported error surfaces as WorkerProtocolError
(or the matching scorer error for ``input_too_long`` / ``divergence``
codes), never as a crash or a silent default.

Training over the wire includes the resolved label words, since the
worker needs the verbalizer's candidate set to compute the loss.
"""

from __future__ import annotations

import json
import shlex
import subprocess
import threading

from .errors import DivergenceDetected, InputTooLong, WorkerProtocolError
from .prompts import PromptInput
from .scoring import HyperParams, ScorerHandle, TrainExample
from .tasks import TaskConfig

_ERROR_MAP = {
    "input_too_long": InputTooLong,
    "divergence": DivergenceDetected,
}


def _require(reply: dict, field: str, kind: type):
    value = reply.get(field)
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise WorkerProtocolError(f"reply field {field!r} missing or not {kind.__name__}: {value!r}")
    return value


def _require_str_list(reply: dict, field: str) -> list[str]:
    value = reply.get(field)
    if not isinstance(value, list) or any(not isinstance(t, str) for t in value):
        raise WorkerProtocolError(f"reply field {field!r} must be a list of strings")
    return value


def _require_float_list(reply: dict, field: str, expected_len: int) -> list[float]:
    value = reply.get(field)
    if not isinstance(value, list) or len(value) != expected_len:
        raise WorkerProtocolError(
            f"reply field {field!r} must be a list of {expected_len} numbers"
        )
    out = []
    for v in value:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise WorkerProtocolError(f"non-numeric value in {field!r}: {v!r}")
        f = float(v)
        if f != f or f in (float("inf"), float("-inf")):
            raise WorkerProtocolError(f"non-finite value in {field!r}: {v!r}")
        out.append(f)
    return out


class WorkerScorer(ScorerHandle):
    """Scorer backed by a worker subprocess; see module docstring."""

    def __init__(self, command: str | list[str], task: TaskConfig | None = None):
        if isinstance(command, str):
            command = shlex.split(command)
        if not command:
            raise ValueError("worker command must be non-empty")
        self._command = list(command)
        self._lock = threading.Lock()
        self._closed = False
        try:
            self._proc = subprocess.Popen(
                self._command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as e:
            raise WorkerProtocolError(f"failed to launch worker {self._command!r}: {e}") from e
        hello = self._call({"op": "hello"})
        if hello.get("ok") is not True:
            raise WorkerProtocolError(f"handshake not acknowledged: {hello!r}")
        self.max_input_tokens = _require(hello, "max_input_tokens", int)
        self.special_overhead = _require(hello, "special_overhead", int)
        self.mask_token = _require(hello, "mask_token", str)
        self._train_label_words: list[str] | None = None
        if task is not None:
            # resolved lazily elsewhere too, but train needs them up front
            from .verbalizer import resolve_label_words

            self._train_label_words = resolve_label_words(task, self)

    # -- plumbing ----------------------------------------------------------

    def _call(self, message: dict) -> dict:
        with self._lock:
            if self._closed or self._proc.poll() is not None:
                raise WorkerProtocolError("worker process is not running")
            try:
                self._proc.stdin.write(json.dumps(message) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as e:
                raise WorkerProtocolError(f"worker pipe closed during send: {e}") from e
            line = self._proc.stdout.readline()
        if line == "":
            raise WorkerProtocolError("worker closed its output stream")
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as e:
            raise WorkerProtocolError(f"worker sent invalid JSON: {line[:200]!r} ({e.msg})") from None
        if not isinstance(reply, dict):
            raise WorkerProtocolError(f"worker reply is not an object: {reply!r}")
        if "error" in reply:
            code = reply.get("error")
            message_text = reply.get("message", "")
            exc = _ERROR_MAP.get(code, WorkerProtocolError)
            raise exc(f"worker error {code!r}: {message_text}")
        return reply

    def close(self) -> None:
        with self._lock:
            if self._closed:
                return
            self._closed = True
            try:
                if self._proc.stdin:
                    self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self) -> "WorkerScorer":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass

    # -- scorer surface ----------------------------------------------------

    def tokenize(self, text: str) -> list[str]:
        return _require_str_list(self._call({"op": "tokenize", "text": text}), "tokens")

    def detokenize(self, tokens: list[str]) -> str:
        return _require(self._call({"op": "detokenize", "tokens": list(tokens)}), "text", str)

    def score(self, prompt: PromptInput, label_word_ids: list[str]) -> list[float]:
        reply = self._call({
            "op": "score",
            "tokens": list(prompt.tokens),
            "mask_index": prompt.mask_index,
            "label_words": list(label_word_ids),
        })
        return _require_float_list(reply, "logits", len(label_word_ids))

    def train(self, examples: list[TrainExample], hp: HyperParams, seed: int) -> float:
        if not examples:
            raise ValueError("train requires at least one example")
        if self._train_label_words is None:
            raise ValueError("construct WorkerScorer with a task to enable training")
        reply = self._call({
            "op": "train",
            "examples": [
                {
                    "tokens": list(ex.prompt.tokens),
                    "mask_index": ex.prompt.mask_index,
                    "gold": ex.gold_class_index,
                }
                for ex in examples
            ],
            "lr": hp.learning_rate,
            "batch_size": hp.batch_size,
            "epochs": hp.epochs,
            "seed": seed,
            "label_words": self._train_label_words,
        })
        loss = reply.get("loss")
        if isinstance(loss, bool) or not isinstance(loss, (int, float)):
            raise WorkerProtocolError(f"train reply lacks numeric 'loss': {reply!r}")
        return float(loss)

    def reset(self) -> None:
        reply = self._call({"op": "reset"})
        if reply.get("ok") is not True:
            raise WorkerProtocolError(f"reset not acknowledged: {reply!r}")

    def describe(self) -> dict:
        d = super().describe()
        d["command"] = self._command
        return d
