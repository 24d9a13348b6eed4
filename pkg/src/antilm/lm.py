"""Logit sources: the abstract contract, a deterministic add-k n-gram toy LM,
and a caching wrapper.

Every decoding objective consumes exactly one primitive: a full-vocabulary
vector of natural-log next-token probabilities for a given token context.
The toy LM exists so that every decoder/objective property can be verified
at desk scale with exact arithmetic; real models attach through the remote
client in :mod:`antilm.remote` behind the same interface.
"""

from __future__ import annotations

import json
import threading
from collections import Counter, OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, InvalidContextError

BOS_TOKEN = "<s>"
EOS_TOKEN = "</s>"
UNK_TOKEN = "<unk>"

# Begin-of-sequence is a context-only symbol: it can appear in conditioning
# contexts but is never predicted, so it lives outside the dense 0..|V|-1
# entry ids. Keeping it out of the probability space is what makes the add-k
# vectors normalize exactly over the entries.
BOS_ID = -1

TokenSeq = tuple[int, ...]


@dataclass(frozen=True)
class Vocabulary:
    """Ordered token alphabet over which next-token distributions are defined.

    ``entries`` holds every predictable token; ids are their positions.
    The end-of-sequence token must be present. An unknown token is optional:
    vocabularies built for corpus ingestion include it, tiny hand-built
    vocabularies need not.
    """

    entries: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(set(self.entries)) != len(self.entries):
            raise ConfigurationError("vocabulary entries must be unique")
        if EOS_TOKEN not in self.entries:
            raise ConfigurationError(f"vocabulary must contain {EOS_TOKEN!r}")
        if BOS_TOKEN in self.entries:
            raise ConfigurationError(
                f"{BOS_TOKEN!r} is a context-only symbol and cannot be a vocabulary entry"
            )
        object.__setattr__(self, "_index", {tok: i for i, tok in enumerate(self.entries)})

    @classmethod
    def from_tokens(cls, tokens: Iterable[str], include_unk: bool = False) -> "Vocabulary":
        """Canonical vocabulary: EOS first, optional UNK, then sorted surface tokens."""
        surface = sorted(set(tokens) - {BOS_TOKEN, EOS_TOKEN, UNK_TOKEN})
        specials = [EOS_TOKEN] + ([UNK_TOKEN] if include_unk else [])
        return cls(tuple(specials + surface))

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def eos_id(self) -> int:
        return self._index[EOS_TOKEN]  # type: ignore[attr-defined]

    @property
    def unk_id(self) -> int | None:
        return self._index.get(UNK_TOKEN)  # type: ignore[attr-defined]

    @property
    def bos_id(self) -> int:
        return BOS_ID

    def id_of(self, token: str) -> int | None:
        if token == BOS_TOKEN:
            return BOS_ID
        return self._index.get(token)  # type: ignore[attr-defined]

    def token_of(self, token_id: int) -> str:
        if token_id == BOS_ID:
            return BOS_TOKEN
        if 0 <= token_id < len(self.entries):
            return self.entries[token_id]
        raise InvalidContextError(f"token id {token_id} out of range for |V|={len(self.entries)}")


def tokenize_toy(text: str, vocab: Vocabulary) -> TokenSeq:
    """Whitespace tokenizer for the toy LM. OOV words map to the unknown id."""
    ids = []
    for word in text.split():
        token_id = vocab.id_of(word)
        if token_id is None:
            token_id = vocab.unk_id
            if token_id is None:
                raise ConfigurationError(
                    f"word {word!r} not in vocabulary and vocabulary has no {UNK_TOKEN!r}"
                )
        ids.append(token_id)
    return tuple(ids)


def detokenize_toy(ids: Sequence[int], vocab: Vocabulary) -> str:
    return " ".join(vocab.token_of(i) for i in ids)


class LogitSource:
    """Anything that can answer full-vocabulary next-token log-probabilities.

    Implementations must be safe for concurrent read-only queries after
    construction, and ``next_logprobs`` must be pure: the same context always
    yields the same vector.
    """

    @property
    def vocab_size(self) -> int:
        raise NotImplementedError

    def next_logprobs(self, context: Sequence[int]) -> np.ndarray:
        raise NotImplementedError

    def next_logprobs_many(self, contexts: Sequence[Sequence[int]]) -> list[np.ndarray]:
        """Batched variant; default implementation loops. Order is preserved."""
        return [self.next_logprobs(ctx) for ctx in contexts]

    def tokenize(self, text: str) -> TokenSeq:
        raise NotImplementedError

    def detokenize(self, ids: Sequence[int]) -> str:
        raise NotImplementedError

    @property
    def stop_token_ids(self) -> frozenset[int]:
        """Default generation terminators (end-of-sequence, newline if the
        source's tokenizer has one)."""
        raise NotImplementedError


SERIAL_FORMAT = "antilm-toy-ngram"
SERIAL_VERSION = 1


class NGramLM(LogitSource):
    """Fixed-order add-k n-gram LM with begin-of-sequence padding.

    For a context ``h`` (the last ``order-1`` tokens, left-padded with the
    begin symbol) the next-token distribution is the exact closed form

        p(w | h) = (count(h, w) + k) / (count(h) + k * |V|)

    with no backoff or interpolation, so every emitted vector is exactly
    normalized and every probability is hand-checkable.
    """

    def __init__(
        self,
        order: int,
        k: float,
        vocab: Vocabulary,
        counts: Mapping[tuple[str, ...], Mapping[str, int]],
    ) -> None:
        if order < 1:
            raise ConfigurationError(f"order must be >= 1, got {order}")
        if not (k > 0):
            raise ConfigurationError(f"smoothing constant k must be > 0, got {k}")
        self.order = order
        self.k = float(k)
        self.vocab = vocab
        self.counts: dict[tuple[str, ...], Counter[str]] = {
            tuple(ctx): Counter(per_tok) for ctx, per_tok in counts.items()
        }
        self._context_totals = {ctx: sum(c.values()) for ctx, c in self.counts.items()}

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    @property
    def stop_token_ids(self) -> frozenset[int]:
        return frozenset({self.vocab.eos_id})

    def tokenize(self, text: str) -> TokenSeq:
        return tokenize_toy(text, self.vocab)

    def detokenize(self, ids: Sequence[int]) -> str:
        return detokenize_toy(ids, self.vocab)

    def _context_key(self, context: Sequence[int]) -> tuple[str, ...]:
        tokens = [self.vocab.token_of(i) for i in context]
        need = self.order - 1
        padded = [BOS_TOKEN] * max(0, need - len(tokens)) + tokens
        return tuple(padded[len(padded) - need:]) if need else ()

    def next_logprobs(self, context: Sequence[int]) -> np.ndarray:
        key = self._context_key(context)
        per_tok = self.counts.get(key)
        size = len(self.vocab)
        count_vec = np.zeros(size, dtype=np.float64)
        total = 0
        if per_tok is not None:
            total = self._context_totals[key]
            for tok, c in per_tok.items():
                idx = self.vocab.id_of(tok)
                if idx is None or idx < 0:
                    raise ConfigurationError(f"count table token {tok!r} not in vocabulary")
                count_vec[idx] = c
        probs = (count_vec + self.k) / (total + self.k * size)
        vec = np.log(probs)
        vec.setflags(write=False)
        return vec

    # --- serialization (versioned JSON, stable key order) ---

    def to_json_dict(self) -> dict:
        counts = {
            " ".join(ctx): {tok: int(c) for tok, c in sorted(per_tok.items())}
            for ctx, per_tok in sorted(self.counts.items())
        }
        return {
            "format": SERIAL_FORMAT,
            "version": SERIAL_VERSION,
            "order": self.order,
            "k": self.k,
            "vocab": list(self.vocab.entries),
            "counts": counts,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, ensure_ascii=False, indent=2)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps() + "\n", encoding="utf-8")

    @classmethod
    def from_json_dict(cls, doc: Mapping) -> "NGramLM":
        if doc.get("format") != SERIAL_FORMAT:
            raise ConfigurationError(f"not a toy LM document (format={doc.get('format')!r})")
        if doc.get("version") != SERIAL_VERSION:
            raise ConfigurationError(f"unsupported toy LM version {doc.get('version')!r}")
        vocab = Vocabulary(tuple(doc["vocab"]))
        counts = {
            tuple(ctx.split(" ")) if ctx else (): per_tok
            for ctx, per_tok in doc["counts"].items()
        }
        return cls(order=int(doc["order"]), k=float(doc["k"]), vocab=vocab, counts=counts)

    @classmethod
    def load(cls, path: str | Path) -> "NGramLM":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot load toy LM from {path}: {exc}") from exc
        return cls.from_json_dict(doc)


def train_ngram(
    corpus: Sequence[str | Sequence[str]],
    order: int,
    k: float,
    vocab: Vocabulary | None = None,
    include_unk: bool = False,
) -> NGramLM:
    """Count-train an add-k n-gram LM.

    Each corpus item is a sentence (string, whitespace-split) or a pre-split
    token sequence. Every sequence is left-padded with ``order - 1`` begin
    symbols and closed with one end-of-sequence event. When no vocabulary is
    given, one is built from the corpus surface tokens (plus the unknown
    token when ``include_unk`` is set).
    """
    if order < 1:
        raise ConfigurationError(f"order must be >= 1, got {order}")
    if not (k > 0):
        raise ConfigurationError(f"smoothing constant k must be > 0, got {k}")
    sequences = [item.split() if isinstance(item, str) else list(item) for item in corpus]
    if not sequences:
        raise ConfigurationError("training corpus is empty")
    if vocab is None:
        vocab = Vocabulary.from_tokens(
            (tok for seq in sequences for tok in seq), include_unk=include_unk
        )

    def canonical(tok: str) -> str:
        if tok == BOS_TOKEN or vocab.id_of(tok) is not None:
            return tok
        if vocab.unk_id is None:
            raise ConfigurationError(
                f"corpus token {tok!r} not in vocabulary and vocabulary has no {UNK_TOKEN!r}"
            )
        return UNK_TOKEN

    counts: dict[tuple[str, ...], Counter[str]] = {}
    pad = [BOS_TOKEN] * (order - 1)
    for seq in sequences:
        tokens = pad + [canonical(t) for t in seq] + [EOS_TOKEN]
        for i in range(order - 1, len(tokens)):
            ctx = tuple(tokens[i - order + 1 : i])
            counts.setdefault(ctx, Counter())[tokens[i]] += 1
    return NGramLM(order=order, k=k, vocab=vocab, counts=counts)


class CachedSource(LogitSource):
    """Memoizing wrapper keyed by exact context, with query instrumentation.

    Lookups may run concurrently; insertion is serialized and single-flight
    (a second thread asking for an in-flight context waits rather than
    recomputing), which keeps the underlying-call count deterministic across
    thread schedules. ``capacity=None`` means unbounded; otherwise least
    recently used contexts are evicted.
    """

    def __init__(self, source: LogitSource, capacity: int | None = None) -> None:
        if capacity is not None and capacity < 1:
            raise ConfigurationError(f"cache capacity must be >= 1, got {capacity}")
        self.source = source
        self.capacity = capacity
        self._lock = threading.Lock()
        self._store: OrderedDict[TokenSeq, np.ndarray] = OrderedDict()
        self._inflight: dict[TokenSeq, threading.Event] = {}
        self._underlying: Counter[TokenSeq] = Counter()
        self._queries = 0
        self._hits = 0

    # --- instrumentation ---

    @property
    def total_queries(self) -> int:
        return self._queries

    @property
    def total_hits(self) -> int:
        return self._hits

    @property
    def underlying_calls(self) -> int:
        return sum(self._underlying.values())

    def calls_for(self, context: Sequence[int]) -> int:
        """Underlying (non-memoized) calls issued for this exact context."""
        return self._underlying[tuple(context)]

    def reset_stats(self) -> None:
        with self._lock:
            self._underlying.clear()
            self._queries = 0
            self._hits = 0

    # --- LogitSource surface (delegated) ---

    @property
    def vocab_size(self) -> int:
        return self.source.vocab_size

    def tokenize(self, text: str) -> TokenSeq:
        return self.source.tokenize(text)

    def detokenize(self, ids: Sequence[int]) -> str:
        return self.source.detokenize(ids)

    @property
    def stop_token_ids(self) -> frozenset[int]:
        return self.source.stop_token_ids

    # --- memoized queries ---

    def next_logprobs(self, context: Sequence[int]) -> np.ndarray:
        return self.next_logprobs_many([context])[0]

    def _insert(self, key: TokenSeq, vec: np.ndarray) -> np.ndarray:
        arr = np.asarray(vec, dtype=np.float64)
        arr.setflags(write=False)
        self._underlying[key] += 1
        self._store[key] = arr
        self._store.move_to_end(key)
        if self.capacity is not None:
            while len(self._store) > self.capacity:
                self._store.popitem(last=False)
        return arr

    def next_logprobs_many(self, contexts: Sequence[Sequence[int]]) -> list[np.ndarray]:
        keys = [tuple(ctx) for ctx in contexts]
        out: list[np.ndarray | None] = [None] * len(keys)
        owned: list[TokenSeq] = []
        owned_positions: dict[TokenSeq, list[int]] = {}
        waiting: list[tuple[int, TokenSeq, threading.Event]] = []
        with self._lock:
            for pos, key in enumerate(keys):
                self._queries += 1
                vec = self._store.get(key)
                if vec is not None:
                    self._hits += 1
                    self._store.move_to_end(key)
                    out[pos] = vec
                elif key in owned_positions:
                    # Duplicate within this batch: one underlying fetch.
                    owned_positions[key].append(pos)
                elif key in self._inflight:
                    waiting.append((pos, key, self._inflight[key]))
                else:
                    owned.append(key)
                    owned_positions[key] = [pos]
                    self._inflight[key] = threading.Event()
        if owned:
            try:
                fetched = self.source.next_logprobs_many(owned)
            except BaseException:
                with self._lock:
                    for key in owned:
                        event = self._inflight.pop(key, None)
                        if event is not None:
                            event.set()
                raise
            with self._lock:
                for key, vec in zip(owned, fetched):
                    arr = self._insert(key, vec)
                    for pos in owned_positions[key]:
                        out[pos] = arr
                    event = self._inflight.pop(key, None)
                    if event is not None:
                        event.set()
        for pos, key, event in waiting:
            event.wait()
            with self._lock:
                vec = self._store.get(key)
                if vec is not None:
                    self._hits += 1
                    self._store.move_to_end(key)
            if vec is None:
                # Producer failed or the entry was evicted already; fetch
                # directly (correct, just unshared).
                vec = self.source.next_logprobs(key)
                with self._lock:
                    vec = self._insert(key, vec)
            out[pos] = vec
        return out  # type: ignore[return-value]  # every position is filled above


def cached(source: LogitSource, capacity: int | None = None) -> CachedSource:
    """Wrap ``source`` with a bounded memo keyed by exact context."""
    return CachedSource(source, capacity=capacity)
