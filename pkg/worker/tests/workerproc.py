"""Shared test helper: a raw JSON-lines client for a worker subprocess."""

import json
import subprocess
import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent
FIXTURE_MODEL = HERE / "fixtures" / "tiny_mlm"
GOLDEN_TRANSCRIPT = HERE / "fixtures" / "golden_transcript.jsonl"


class WorkerProc:
    def __init__(self):
        self.proc = subprocess.Popen(
            [sys.executable, "-m", "mlm_worker.serve", "--model", str(FIXTURE_MODEL)],
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            encoding="utf-8",
            bufsize=1,
        )

    def send_line(self, raw: str) -> str:
        self.proc.stdin.write(raw + "\n")
        self.proc.stdin.flush()
        return self.proc.stdout.readline()

    def call(self, message: dict) -> dict:
        return json.loads(self.send_line(json.dumps(message)))

    def close(self) -> None:
        try:
            self.proc.stdin.close()
        except OSError:
            pass
        try:
            self.proc.wait(timeout=10)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait()
