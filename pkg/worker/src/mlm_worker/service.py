"""Model-side operations behind the wire protocol.

Wraps one masked-LM checkpoint (model + tokenizer loaded from a local
directory or hub id) and exposes tokenize/detokenize, mask-position logit
scoring at label-word ids, prompt-based fine-tuning, and exact state
reset.  A pristine copy of the weights is cloned at load time; ``reset``
restores it bit-for-bit, so a scoring client can interleave training runs
without reloading the checkpoint.

Fine-tuning is plain mini-batch SGD (no momentum, no adaptive scaling)
over the cross-entropy between the softmax of the label-word logits at
the mask position and the gold class.  All model parameters are updated.
The loss returned is the final full-set loss in eval mode.
"""

from __future__ import annotations

import math
from random import Random

import torch


class ServiceError(Exception):
    """Operation failure with a protocol error code."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


class WorkerService:
    def __init__(self, model_id: str):
        # Single-threaded math keeps repeated runs bit-identical.
        torch.set_num_threads(1)
        from transformers import AutoModelForMaskedLM, AutoTokenizer
        from transformers.utils import logging as hf_logging

        hf_logging.set_verbosity_error()
        hf_logging.disable_progress_bar()

        self.model_id = model_id
        self.tokenizer = AutoTokenizer.from_pretrained(model_id)
        self.model = AutoModelForMaskedLM.from_pretrained(model_id)
        self.model.eval()
        self._snapshot = {k: v.clone() for k, v in self.model.state_dict().items()}

        self.max_input_tokens = int(self.model.config.max_position_embeddings)
        self.special_overhead = int(self.tokenizer.num_special_tokens_to_add())
        self.mask_token = self.tokenizer.mask_token

    # -- protocol operations -----------------------------------------------

    def hello(self) -> dict:
        return {
            "ok": True,
            "max_input_tokens": self.max_input_tokens,
            "special_overhead": self.special_overhead,
            "mask_token": self.mask_token,
        }

    def tokenize(self, text: str) -> list[str]:
        return self.tokenizer.tokenize(text)

    def detokenize(self, tokens: list[str]) -> str:
        return self.tokenizer.convert_tokens_to_string(tokens)

    def score(self, tokens: list[str], mask_index: int, label_words: list[str]) -> list[float]:
        input_ids, mask_pos = self._encode(tokens, mask_index)
        word_ids = self.tokenizer.convert_tokens_to_ids(label_words)
        batch = torch.tensor([input_ids])
        with torch.no_grad():
            logits = self.model(
                input_ids=batch, attention_mask=torch.ones_like(batch)
            ).logits
        return [float(x) for x in logits[0, mask_pos, word_ids]]

    def train(
        self,
        examples: list[tuple[list[str], int, int]],
        lr: float,
        batch_size: int,
        epochs: int,
        seed: int,
        label_words: list[str],
    ) -> float:
        encoded = []
        for tokens, mask_index, gold in examples:
            input_ids, mask_pos = self._encode(tokens, mask_index)
            if not 0 <= gold < len(label_words):
                raise ServiceError(
                    "bad_request", f"gold index {gold} out of range for {len(label_words)} label words"
                )
            encoded.append((input_ids, mask_pos, gold))
        word_ids = torch.tensor(self.tokenizer.convert_tokens_to_ids(label_words))

        torch.manual_seed(seed)
        order_rng = Random(seed)
        optimizer = torch.optim.SGD(self.model.parameters(), lr=lr)
        n = len(encoded)
        try:
            self.model.train()
            for _ in range(epochs):
                order = list(range(n))
                order_rng.shuffle(order)
                for start in range(0, n, batch_size):
                    batch = [encoded[i] for i in order[start:start + batch_size]]
                    loss = self._batch_loss(batch, word_ids)
                    if not math.isfinite(loss.item()):
                        raise ServiceError("divergence", "training loss is not finite")
                    optimizer.zero_grad()
                    loss.backward()
                    optimizer.step()
        finally:
            self.model.eval()

        with torch.no_grad():
            final = float(self._batch_loss(encoded, word_ids))
        if not math.isfinite(final):
            raise ServiceError("divergence", "final loss is not finite")
        return final

    def reset(self) -> None:
        self.model.load_state_dict(self._snapshot)
        self.model.eval()

    # -- internals ---------------------------------------------------------

    def _encode(self, tokens: list[str], mask_index: int) -> tuple[list[int], int]:
        """Validate a prompt and wrap it in the model's special tokens."""
        if len(tokens) + self.special_overhead > self.max_input_tokens:
            raise ServiceError(
                "input_too_long",
                f"{len(tokens)} tokens + {self.special_overhead} special exceed "
                f"{self.max_input_tokens}",
            )
        if not 0 <= mask_index < len(tokens) or tokens[mask_index] != self.mask_token:
            raise ServiceError(
                "bad_request", f"mask_index {mask_index} does not point at {self.mask_token!r}"
            )
        if tokens.count(self.mask_token) != 1:
            raise ServiceError("bad_request", "prompt must contain exactly one mask token")
        ids = self.tokenizer.convert_tokens_to_ids(tokens)
        input_ids = [self.tokenizer.cls_token_id, *ids, self.tokenizer.sep_token_id]
        return input_ids, mask_index + 1

    def _batch_loss(self, batch: list[tuple[list[int], int, int]], word_ids) -> "torch.Tensor":
        width = max(len(ids) for ids, _, _ in batch)
        pad = self.tokenizer.pad_token_id
        input_ids = torch.full((len(batch), width), pad, dtype=torch.long)
        attention = torch.zeros((len(batch), width), dtype=torch.long)
        positions = []
        golds = []
        for row, (ids, mask_pos, gold) in enumerate(batch):
            input_ids[row, :len(ids)] = torch.tensor(ids)
            attention[row, :len(ids)] = 1
            positions.append(mask_pos)
            golds.append(gold)
        logits = self.model(input_ids=input_ids, attention_mask=attention).logits
        selected = logits[torch.arange(len(batch)), positions][:, word_ids]
        return torch.nn.functional.cross_entropy(selected, torch.tensor(golds))
