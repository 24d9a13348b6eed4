"""Model backends: anything with a tokenizer and next-token log-probabilities.

Two implementations ship here. ``HFCausalLMBackend`` wraps any Hugging Face
causal LM (the multilingual XGLM/Bloom/Llama family the server exists for).
``ToyNGramBackend`` reads the decoding engine's serialized toy n-gram model
(a versioned JSON document with add-k counts) so the full wire stack can be
exercised deterministically with no weights download; it reimplements the
tiny closed-form scorer from that document alone.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Protocol, Sequence


class ContextTooLong(ValueError):
    """Context exceeds the backend's window; carries the limit as a hint."""

    def __init__(self, length: int, limit: int) -> None:
        super().__init__(f"context of {length} tokens exceeds max_context {limit}")
        self.limit = limit


class ModelBackend(Protocol):
    model_name: str
    vocab_size: int
    bos_id: int | None
    eos_id: int
    newline_id: int | None
    max_context: int | None

    def tokenize(self, text: str) -> list[int]: ...

    def detokenize(self, ids: Sequence[int]) -> str: ...

    def next_logprobs(self, contexts: Sequence[Sequence[int]]) -> list[list[float]]: ...


TOY_FORMAT = "antilm-toy-ngram"
_TOY_BOS = "<s>"
_TOY_EOS = "</s>"
_TOY_UNK = "<unk>"


class ToyNGramBackend:
    """Serve a serialized add-k n-gram model.

    The document schema is ``{"format", "version", "order", "k", "vocab",
    "counts"}`` with counts keyed by space-joined context tokens. Scoring is
    the exact closed form (count + k) / (total + k * |V|) over the vocab.
    """

    def __init__(self, model_path: str | Path) -> None:
        doc = json.loads(Path(model_path).read_text(encoding="utf-8"))
        if doc.get("format") != TOY_FORMAT:
            raise ValueError(f"not a toy n-gram document: format={doc.get('format')!r}")
        self.model_name = f"toy-ngram:{Path(model_path).name}"
        self.order = int(doc["order"])
        self.k = float(doc["k"])
        self.vocab: list[str] = list(doc["vocab"])
        self._index = {tok: i for i, tok in enumerate(self.vocab)}
        self.counts: dict[tuple[str, ...], dict[str, int]] = {
            (tuple(key.split(" ")) if key else ()): dict(per_tok)
            for key, per_tok in doc["counts"].items()
        }
        self._totals = {ctx: sum(c.values()) for ctx, c in self.counts.items()}
        self.vocab_size = len(self.vocab)
        self.bos_id = None  # begin-of-sequence is context padding, not a served token
        self.eos_id = self._index[_TOY_EOS]
        self.newline_id = None
        self.max_context = None

    def tokenize(self, text: str) -> list[int]:
        unk = self._index.get(_TOY_UNK)
        ids = []
        for word in text.split():
            idx = self._index.get(word, unk)
            if idx is None:
                raise ValueError(f"word {word!r} not in vocabulary and no unknown token")
            ids.append(idx)
        return ids

    def detokenize(self, ids: Sequence[int]) -> str:
        return " ".join(self.vocab[i] for i in ids)

    def next_logprobs(self, contexts: Sequence[Sequence[int]]) -> list[list[float]]:
        out = []
        for ctx in contexts:
            tokens = [self.vocab[i] for i in ctx]
            need = self.order - 1
            padded = [_TOY_BOS] * max(0, need - len(tokens)) + tokens
            key = tuple(padded[len(padded) - need:]) if need else ()
            per_tok = self.counts.get(key, {})
            total = self._totals.get(key, 0)
            denom = total + self.k * self.vocab_size
            out.append([
                math.log((per_tok.get(tok, 0) + self.k) / denom) for tok in self.vocab
            ])
        return out


class HFCausalLMBackend:
    """Wrap a Hugging Face causal LM for serving.

    Tokenization is the model's own (special tokens included, so prompts get
    the model's usual begin-of-text treatment); log-probabilities are the
    log-softmax of the final-position logits, computed greedily one context
    at a time for determinism.
    """

    def __init__(self, model_id: str, device: str = "cpu",
                 max_context: int | None = None) -> None:
        import torch
        from transformers import AutoModelForCausalLM, AutoTokenizer

        self._torch = torch
        self.model_name = model_id
        self.tokenizer = AutoTokenizer.from_pretrained(model_id)
        self.model = AutoModelForCausalLM.from_pretrained(model_id)
        self.model.to(device)
        self.model.eval()
        self.device = device
        self.vocab_size = int(self.model.get_output_embeddings().weight.shape[0])
        self.eos_id = int(self.tokenizer.eos_token_id)
        self.bos_id = (
            int(self.tokenizer.bos_token_id)
            if self.tokenizer.bos_token_id is not None
            else None
        )
        newline = self.tokenizer.encode("\n", add_special_tokens=False)
        self.newline_id = newline[0] if len(newline) == 1 else None
        model_window = getattr(self.model.config, "max_position_embeddings", None)
        self.max_context = max_context if max_context is not None else model_window

    def tokenize(self, text: str) -> list[int]:
        ids = self.tokenizer.encode(text, add_special_tokens=True)
        # some tokenizers close with EOS; generation must continue past it
        if len(ids) > 1 and ids[-1] == self.eos_id:
            ids = ids[:-1]
        return [int(i) for i in ids]

    def detokenize(self, ids: Sequence[int]) -> str:
        return self.tokenizer.decode(list(ids), skip_special_tokens=True)

    def next_logprobs(self, contexts: Sequence[Sequence[int]]) -> list[list[float]]:
        torch = self._torch
        out = []
        for ctx in contexts:
            if self.max_context is not None and len(ctx) > self.max_context:
                raise ContextTooLong(len(ctx), self.max_context)
            with torch.inference_mode():
                input_ids = torch.tensor([list(ctx)], dtype=torch.long, device=self.device)
                logits = self.model(input_ids).logits[0, -1, :]
                logprobs = torch.log_softmax(logits.to(torch.float64), dim=-1)
            out.append(logprobs.cpu().tolist())
        return out


def load_backend(model_id: str, device: str = "cpu",
                 max_context: int | None = None) -> ModelBackend:
    """Toy JSON documents serve locally; anything else resolves through
    the Hugging Face hub/cache."""
    path = Path(model_id)
    if model_id.endswith(".json") and path.exists():
        return ToyNGramBackend(path)
    return HFCausalLMBackend(model_id, device=device, max_context=max_context)
