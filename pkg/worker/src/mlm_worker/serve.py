"""JSON-lines protocol loop over stdin/stdout.

One request object per line, one reply line per request — including for
malformed input, so the client's request/reply pairing never slips.  Any
failure becomes an ``{"error": code, "message": ...}`` line: parse and
shape problems are ``bad_request``, unrecognized operations are
``unknown_op``, oversized prompts are ``input_too_long``, non-finite
training losses are ``divergence``, and anything unexpected is
``internal``.  The loop itself never dies on bad input; it ends only when
stdin closes.
"""

from __future__ import annotations

import argparse
import json
import sys

from .service import ServiceError, WorkerService


def _str_list(msg: dict, field: str, *, allow_empty: bool = True) -> list[str]:
    value = msg.get(field)
    if not isinstance(value, list) or any(not isinstance(t, str) for t in value):
        raise ServiceError("bad_request", f"field {field!r} must be a list of strings")
    if not allow_empty and not value:
        raise ServiceError("bad_request", f"field {field!r} must be non-empty")
    return value


def _int_field(msg: dict, field: str, minimum: int | None = None) -> int:
    value = msg.get(field)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ServiceError("bad_request", f"field {field!r} must be an integer")
    if minimum is not None and value < minimum:
        raise ServiceError("bad_request", f"field {field!r} must be >= {minimum}")
    return value


def _positive_float(msg: dict, field: str) -> float:
    value = msg.get(field)
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
        raise ServiceError("bad_request", f"field {field!r} must be a positive number")
    return float(value)


def _handle(service: WorkerService, msg: dict) -> dict:
    op = msg.get("op")
    if op == "hello":
        return service.hello()
    if op == "tokenize":
        text = msg.get("text")
        if not isinstance(text, str):
            raise ServiceError("bad_request", "field 'text' must be a string")
        return {"tokens": service.tokenize(text)}
    if op == "detokenize":
        return {"text": service.detokenize(_str_list(msg, "tokens"))}
    if op == "score":
        return {
            "logits": service.score(
                _str_list(msg, "tokens"),
                _int_field(msg, "mask_index"),
                _str_list(msg, "label_words", allow_empty=False),
            )
        }
    if op == "train":
        raw = msg.get("examples")
        if not isinstance(raw, list) or not raw:
            raise ServiceError("bad_request", "field 'examples' must be a non-empty list")
        examples = []
        for ex in raw:
            if not isinstance(ex, dict):
                raise ServiceError("bad_request", "each example must be an object")
            examples.append((
                _str_list(ex, "tokens"),
                _int_field(ex, "mask_index"),
                _int_field(ex, "gold", minimum=0),
            ))
        loss = service.train(
            examples,
            lr=_positive_float(msg, "lr"),
            batch_size=_int_field(msg, "batch_size", minimum=1),
            epochs=_int_field(msg, "epochs", minimum=1),
            seed=_int_field(msg, "seed"),
            label_words=_str_list(msg, "label_words", allow_empty=False),
        )
        return {"loss": loss}
    if op == "reset":
        service.reset()
        return {"ok": True}
    raise ServiceError("unknown_op", f"unknown op {op!r}")


def serve(service: WorkerService, stdin=None, stdout=None) -> None:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for line in stdin:
        try:
            msg = json.loads(line)
            if not isinstance(msg, dict):
                raise ServiceError("bad_request", "request must be a JSON object")
            reply = _handle(service, msg)
        except ServiceError as e:
            reply = {"error": e.code, "message": e.message}
        except json.JSONDecodeError as e:
            reply = {"error": "bad_request", "message": f"invalid JSON: {e.msg}"}
        except Exception as e:  # keep the stream alive no matter what
            reply = {"error": "internal", "message": f"{type(e).__name__}: {e}"}
        stdout.write(json.dumps(reply) + "\n")
        stdout.flush()


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="mlm-worker",
        description="Serve a masked-LM over the stdio JSON-lines protocol: "
                    "hello, tokenize, detokenize, score, train, reset.",
        epilog="Training uses plain mini-batch SGD over all model parameters "
               "(no momentum, no adaptive scaling); the optimizer is fixed. "
               "The train request must include the 'label_words' list so the "
               "worker can compute the cross-entropy over the verbalizer's "
               "candidate set.",
    )
    parser.add_argument("--model", required=True,
                        help="model directory or hub id with a masked-LM head")
    args = parser.parse_args(argv)
    try:
        service = WorkerService(args.model)
    except Exception as e:
        print(f"failed to load model {args.model!r}: {e}", file=sys.stderr)
        return 1
    serve(service)
    return 0


if __name__ == "__main__":
    sys.exit(main())
