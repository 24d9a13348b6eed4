"""The five decoding objectives as pure score transforms.

Each objective subtracts a weighted penalty vector from the conditional
next-token log-probabilities:

    base     adjusted = logp(. | prompt, y_<t)
    pmi-u    adjusted = logp(. | prompt, y_<t) - alpha * logp(. | u, y_<t)
    pmi-x    adjusted = logp(. | prompt, y_<t) - alpha * logp(. | x, y_<t)
    alm-u    adjusted = logp(. | prompt, y_<t) - gamma^t * logp(. | u)
    alm-x    adjusted = logp(. | prompt, y_<t) - gamma^t * logp(. | x)

where u is the bare instruction, x the source sentence, and t the 1-based
generation step. The anti-LM penalties condition on a prefix-independent
context, so they are computed once per sentence and reused at every step;
the PMI penalties track the generated prefix and need one extra query per
step. Adjusted vectors are raw scores, never renormalized: ranking happens
on the difference itself.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .corpus import PromptParts
from .errors import ConfigurationError, ContractViolation
from .lm import LogitSource, TokenSeq

SWEEP_WEIGHTS = (-0.1, 0.1, 0.3, 0.5, 0.8, 1.0)
SWEEP_RANGE = (-0.1, 1.0)

DEFAULT_ALPHA = 0.1
DEFAULT_GAMMA = 0.3


class ObjectiveKind(Enum):
    BASE = "base"
    PMI_U = "pmi-u"
    PMI_X = "pmi-x"
    ALM_U = "alm-u"
    ALM_X = "alm-x"

    @property
    def is_pmi(self) -> bool:
        return self in (ObjectiveKind.PMI_U, ObjectiveKind.PMI_X)

    @property
    def is_alm(self) -> bool:
        return self in (ObjectiveKind.ALM_U, ObjectiveKind.ALM_X)

    @property
    def conditions_on_source(self) -> bool:
        return self in (ObjectiveKind.PMI_X, ObjectiveKind.ALM_X)


@dataclass(frozen=True)
class ObjectiveSpec:
    """Which objective to run and its penalty weight (alpha or gamma)."""

    kind: ObjectiveKind
    weight: float = 0.0

    def __post_init__(self) -> None:
        if not np.isfinite(self.weight):
            raise ConfigurationError(f"objective weight must be finite, got {self.weight}")

    @classmethod
    def parse(cls, name: str, weight: float | None = None) -> "ObjectiveSpec":
        try:
            kind = ObjectiveKind(name)
        except ValueError:
            valid = ", ".join(k.value for k in ObjectiveKind)
            raise ConfigurationError(f"unknown objective {name!r} (expected one of: {valid})")
        if weight is None:
            weight = 0.0 if kind is ObjectiveKind.BASE else (
                DEFAULT_GAMMA if kind.is_alm else DEFAULT_ALPHA
            )
        return cls(kind=kind, weight=float(weight))

    @property
    def name(self) -> str:
        return self.kind.value

    @property
    def outside_sweep_range(self) -> bool:
        """Weights outside the studied range are allowed but worth flagging."""
        lo, hi = SWEEP_RANGE
        return self.kind is not ObjectiveKind.BASE and not (lo <= self.weight <= hi)


@dataclass(frozen=True)
class PromptTokens:
    """The prompt pieces of one sentence, tokenized once for a given source."""

    prompt: TokenSeq
    instruction: TokenSeq
    source_sentence: TokenSeq

    @classmethod
    def from_parts(cls, source: LogitSource, parts: PromptParts) -> "PromptTokens":
        return cls(
            prompt=tuple(source.tokenize(parts.rendered)),
            instruction=tuple(source.tokenize(parts.instruction_text)),
            source_sentence=tuple(source.tokenize(parts.source_text)),
        )


@dataclass(frozen=True)
class StepContexts:
    """Token contexts to query at one step: the main conditional plus the
    objective's penalty context (absent for base)."""

    main: TokenSeq
    aux: TokenSeq | None
    aux_is_static: bool


def required_contexts(
    spec: ObjectiveSpec, tokens: PromptTokens, prefix: Sequence[int], t: int
) -> StepContexts:
    """Contexts needed to score step ``t`` given the generated ``prefix``.

    For the anti-LM kinds the penalty context never includes the prefix, so
    it is identical at every step of a sentence.
    """
    if t < 1:
        raise ContractViolation(f"step index is 1-based, got t={t}")
    if len(prefix) != t - 1:
        raise ContractViolation(f"prefix length {len(prefix)} inconsistent with t={t}")
    prefix = tuple(prefix)
    main = tokens.prompt + prefix
    kind = spec.kind
    if kind is ObjectiveKind.BASE:
        return StepContexts(main=main, aux=None, aux_is_static=False)
    if kind is ObjectiveKind.PMI_U:
        return StepContexts(main=main, aux=tokens.instruction + prefix, aux_is_static=False)
    if kind is ObjectiveKind.PMI_X:
        return StepContexts(main=main, aux=tokens.source_sentence + prefix, aux_is_static=False)
    if kind is ObjectiveKind.ALM_U:
        return StepContexts(main=main, aux=tokens.instruction, aux_is_static=True)
    return StepContexts(main=main, aux=tokens.source_sentence, aux_is_static=True)


def penalty_weight(spec: ObjectiveSpec, t: int, gamma_origin: str = "one-based") -> float:
    """Effective penalty weight at step ``t``: alpha for PMI, gamma^t for ALM.

    ``gamma_origin`` selects whether the first generated token uses gamma^1
    (default) or gamma^0; the literature does not pin this down, so it is a
    switch rather than an assumption.
    """
    if t < 1:
        raise ContractViolation(f"step index is 1-based, got t={t}")
    if spec.kind is ObjectiveKind.BASE:
        return 0.0
    if spec.kind.is_pmi:
        return spec.weight
    if gamma_origin == "one-based":
        exponent = t
    elif gamma_origin == "zero-based":
        exponent = t - 1
    else:
        raise ConfigurationError(f"unknown gamma_origin {gamma_origin!r}")
    return float(spec.weight) ** exponent


def adjust(
    base: np.ndarray,
    aux: np.ndarray | None,
    spec: ObjectiveSpec,
    t: int,
    gamma_origin: str = "one-based",
) -> np.ndarray:
    """Elementwise ``base - w(t) * aux``; the raw ranking scores for step t.

    A weight of exactly zero returns ``base`` unchanged (bit-identical), so
    zero-weight contrastive decodes are token-identical to base decodes.
    """
    if spec.kind is ObjectiveKind.BASE:
        return base
    if aux is None:
        raise ContractViolation(f"objective {spec.name} requires an aux vector")
    if base.shape != aux.shape:
        raise ContractViolation(
            f"base/aux length mismatch: {base.shape} vs {aux.shape}"
        )
    w = penalty_weight(spec, t, gamma_origin)
    if w == 0.0:
        return base
    return base - w * aux


class AlmPenalty:
    """Per-sentence memo for the anti-LM penalty vector.

    The penalty conditions only on the fixed context (source sentence or
    instruction), so one underlying query serves every step and every live
    beam hypothesis of a sentence's decode.
    """

    def __init__(self, source: LogitSource, spec: ObjectiveSpec, tokens: PromptTokens) -> None:
        if not spec.kind.is_alm:
            raise ContractViolation(f"AlmPenalty is only defined for alm-* kinds, got {spec.name}")
        self._source = source
        self._context = required_contexts(spec, tokens, (), 1).aux
        self._vector: np.ndarray | None = None
        self.queries_issued = 0

    @property
    def context(self) -> TokenSeq:
        return self._context  # type: ignore[return-value]

    def vector(self) -> np.ndarray:
        if self._vector is None:
            self._vector = self._source.next_logprobs(self._context)
            self.queries_issued += 1
        return self._vector


def alm_penalty(source: LogitSource, spec: ObjectiveSpec, tokens: PromptTokens) -> np.ndarray:
    """One-shot computation of the anti-LM penalty vector for a sentence."""
    return AlmPenalty(source, spec, tokens).vector()
