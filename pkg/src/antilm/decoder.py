"""Greedy decoding and beam search over objective-adjusted scores, plus an
exhaustive-search oracle used to prove the beam implementation correct.

Scores accumulate as raw sums of the adjusted per-step values with no
length normalization. All tie-breaking is lexicographic on the token
sequence (for a single step this reduces to lowest token id), which makes
every decode byte-identical across runs, platforms and thread counts.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import PromptParts
from .errors import ConfigurationError, ContractViolation
from .lm import LogitSource, TokenSeq
from .objectives import (
    AlmPenalty,
    ObjectiveSpec,
    PromptTokens,
    adjust,
    required_contexts,
)

GAMMA_ORIGINS = ("one-based", "zero-based")


@dataclass(frozen=True)
class DecodeConfig:
    """Shared knobs for greedy and beam decoding.

    ``stop_token_ids=None`` defers to the logit source's own terminators
    (end-of-sequence plus newline when the tokenizer has one). Ties are
    always broken toward the lexicographically smallest token sequence;
    that rule is fixed, not configurable.
    """

    beam_width: int = 5
    max_new_tokens: int = 128
    stop_token_ids: frozenset[int] | None = None
    gamma_origin: str = "one-based"

    def __post_init__(self) -> None:
        if self.beam_width < 1:
            raise ConfigurationError(f"beam_width must be >= 1, got {self.beam_width}")
        if self.max_new_tokens < 1:
            raise ConfigurationError(f"max_new_tokens must be >= 1, got {self.max_new_tokens}")
        if self.gamma_origin not in GAMMA_ORIGINS:
            raise ConfigurationError(
                f"gamma_origin must be one of {GAMMA_ORIGINS}, got {self.gamma_origin!r}"
            )


@dataclass(frozen=True)
class Hypothesis:
    """A (partial) generation: chosen tokens and their cumulative adjusted
    score. A finished hypothesis ends with the stop token that closed it."""

    tokens: TokenSeq
    score: float
    finished: bool
    finish_reason: str | None = None  # "stop-token" | "max-length"


@dataclass
class DecodeStats:
    """Query accounting for one sentence decode."""

    main_queries: int = 0
    aux_queries: int = 0
    aux_underlying: int = 0  # distinct penalty computations (1 for alm-*)


@dataclass
class DecodeOutput:
    best: Hypothesis
    all_finished: list[Hypothesis]
    per_step_scores: list[float]
    text: str
    stats: DecodeStats = field(default_factory=DecodeStats)
    error: str | None = None


def _resolve_stops(source: LogitSource, cfg: DecodeConfig) -> frozenset[int]:
    stops = cfg.stop_token_ids if cfg.stop_token_ids is not None else source.stop_token_ids
    if not stops:
        raise ConfigurationError("no stop tokens configured and the source declares none")
    return frozenset(stops)


def _visible_tokens(hyp: Hypothesis, stops: frozenset[int]) -> TokenSeq:
    if hyp.finished and hyp.finish_reason == "stop-token" and hyp.tokens:
        return hyp.tokens[:-1]
    return hyp.tokens


class _Session:
    """Single-sentence decode state: tokenized prompt pieces, the anti-LM
    penalty memo, and query counters. Never shared across sentences."""

    def __init__(
        self,
        source: LogitSource,
        spec: ObjectiveSpec,
        parts: PromptParts,
        cfg: DecodeConfig,
    ) -> None:
        self.source = source
        self.spec = spec
        self.cfg = cfg
        self.tokens = PromptTokens.from_parts(source, parts)
        self.stops = _resolve_stops(source, cfg)
        self.stats = DecodeStats()
        self._alm = AlmPenalty(source, spec, self.tokens) if spec.kind.is_alm else None

    def adjusted_scores(self, prefixes: Sequence[TokenSeq], t: int) -> list[np.ndarray]:
        """Adjusted score vectors for every live prefix at step ``t``.

        Queries are batched per step: all main contexts first, then any
        prefix-dependent penalty contexts, in prefix order.
        """
        contexts = [required_contexts(self.spec, self.tokens, p, t) for p in prefixes]
        queries: list[TokenSeq] = [c.main for c in contexts]
        aux_slice: slice | None = None
        if self.spec.kind.is_pmi:
            aux_slice = slice(len(queries), len(queries) + len(contexts))
            queries.extend(c.aux for c in contexts)  # type: ignore[misc]
            self.stats.aux_queries += len(contexts)
            self.stats.aux_underlying += len(contexts)
        self.stats.main_queries += len(contexts)
        vectors = self.source.next_logprobs_many(queries)
        if self._alm is not None:
            before = self._alm.queries_issued
            alm_vec = self._alm.vector()
            issued = self._alm.queries_issued - before
            self.stats.aux_queries += issued
            self.stats.aux_underlying += issued
            aux_vecs: Sequence[np.ndarray | None] = [alm_vec] * len(contexts)
        elif aux_slice is not None:
            aux_vecs = vectors[aux_slice]
        else:
            aux_vecs = [None] * len(contexts)
        return [
            adjust(vectors[i], aux_vecs[i], self.spec, t, self.cfg.gamma_origin)
            for i in range(len(contexts))
        ]

    def output(
        self, best: Hypothesis, finished: list[Hypothesis], per_step: Sequence[float]
    ) -> DecodeOutput:
        text = self.source.detokenize(_visible_tokens(best, self.stops))
        return DecodeOutput(
            best=best,
            all_finished=finished,
            per_step_scores=list(per_step),
            text=text,
            stats=self.stats,
        )


def greedy_decode(
    source: LogitSource,
    spec: ObjectiveSpec,
    parts: PromptParts,
    cfg: DecodeConfig = DecodeConfig(),
) -> DecodeOutput:
    """Argmax decoding: at each step append the highest-adjusted-score token
    (ties to the lowest id); halt on a stop token or at max_new_tokens.

    Selection uses the cumulative score (running total plus step score),
    which is the per-step argmax up to floating-point rounding; it keeps
    greedy bit-identical to beam search at width 1.
    """
    session = _Session(source, spec, parts, cfg)
    prefix: TokenSeq = ()
    per_step: list[float] = []
    running = 0.0
    finished = False
    reason = "max-length"
    for t in range(1, cfg.max_new_tokens + 1):
        scores = session.adjusted_scores([prefix], t)[0]
        token = int(np.argmax(running + scores))  # first (lowest-id) maximum wins ties
        per_step.append(float(scores[token]))
        running = running + float(scores[token])
        prefix = prefix + (token,)
        if token in session.stops:
            finished = True
            reason = "stop-token"
            break
    hyp = Hypothesis(tokens=prefix, score=running, finished=finished, finish_reason=reason)
    return session.output(hyp, [hyp] if finished else [], per_step)


@dataclass(order=True)
class _Beam:
    """Sort key: score descending, then lexicographically smallest tokens."""

    neg_score: float
    tokens: TokenSeq = field(compare=True)
    score: float = field(compare=False)
    steps: tuple[float, ...] = field(compare=False)


def beam_decode(
    source: LogitSource,
    spec: ObjectiveSpec,
    parts: PromptParts,
    cfg: DecodeConfig = DecodeConfig(),
) -> DecodeOutput:
    """Beam search with a finished pool.

    Each step expands every live hypothesis over the full vocabulary and
    keeps the top ``beam_width`` extensions by cumulative adjusted score.
    Extensions ending in a stop token move to the finished pool and free
    their slot. The search ends once the pool holds ``beam_width`` finished
    hypotheses or every live hypothesis has hit ``max_new_tokens``; the best
    finished hypothesis wins, falling back to the best live one if nothing
    finished. No length normalization is applied.
    """
    session = _Session(source, spec, parts, cfg)
    width = cfg.beam_width
    live: list[_Beam] = [_Beam(neg_score=0.0, tokens=(), score=0.0, steps=())]
    pool: list[_Beam] = []
    for t in range(1, cfg.max_new_tokens + 1):
        if not live or len(pool) >= width:
            break
        score_vectors = session.adjusted_scores([b.tokens for b in live], t)
        candidates: list[_Beam] = []
        for beam, vec in zip(live, score_vectors):
            for token in range(len(vec)):
                step = float(vec[token])
                total = beam.score + step
                candidates.append(
                    _Beam(
                        neg_score=-total,
                        tokens=beam.tokens + (token,),
                        score=total,
                        steps=beam.steps + (step,),
                    )
                )
        top = heapq.nsmallest(width, candidates)
        live = []
        for cand in top:
            if cand.tokens[-1] in session.stops:
                pool.append(cand)
            else:
                live.append(cand)
        live.sort(key=lambda b: b.tokens)  # equal lengths: lexicographic order
    pool.sort()
    finished = [
        Hypothesis(tokens=b.tokens, score=b.score, finished=True, finish_reason="stop-token")
        for b in pool
    ]
    if finished:
        best = finished[0]
        best_step_scores = list(pool[0].steps)
    else:
        live.sort()
        top_live = live[0]
        best = Hypothesis(tokens=top_live.tokens, score=top_live.score, finished=False,
                          finish_reason="max-length")
        best_step_scores = list(top_live.steps)
    return session.output(best, finished, best_step_scores)


def exhaustive_argmax(
    source: LogitSource,
    spec: ObjectiveSpec,
    parts: PromptParts,
    max_len: int,
    cfg: DecodeConfig = DecodeConfig(),
) -> Hypothesis:
    """Test oracle: enumerate every sequence up to ``max_len`` and return the
    best one under the objective.

    Sequences terminate at their first stop token; as in beam search,
    terminated sequences are preferred over ones cut off at ``max_len``,
    and ties break to the lexicographically smallest token sequence.
    Refuses to run when ``vocab_size ** max_len`` exceeds one million.
    """
    if max_len < 1:
        raise ConfigurationError(f"max_len must be >= 1, got {max_len}")
    if source.vocab_size ** max_len > 1_000_000:
        raise ConfigurationError(
            f"exhaustive search over |V|^max_len = {source.vocab_size}^{max_len} "
            "exceeds the 10^6 guard"
        )
    session = _Session(source, spec, parts, cfg)
    finished: list[_Beam] = []
    capped: list[_Beam] = []

    def extend(beam: _Beam, t: int) -> None:
        vec = session.adjusted_scores([beam.tokens], t)[0]
        for token in range(len(vec)):
            step = float(vec[token])
            total = beam.score + step
            child = _Beam(
                neg_score=-total,
                tokens=beam.tokens + (token,),
                score=total,
                steps=beam.steps + (step,),
            )
            if token in session.stops:
                finished.append(child)
            elif t == max_len:
                capped.append(child)
            else:
                extend(child, t + 1)

    extend(_Beam(neg_score=0.0, tokens=(), score=0.0, steps=()), 1)
    pool = finished if finished else capped
    winner = min(pool)
    return Hypothesis(
        tokens=winner.tokens,
        score=winner.score,
        finished=bool(finished),
        finish_reason="stop-token" if finished else "max-length",
    )
