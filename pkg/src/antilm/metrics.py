"""Translation quality and failure metrics.

BLEU follows the WMT convention exactly: the mteval-13a tokenizer, cased
corpus-level clipped 4-gram precisions with exponential smoothing for zero
counts, and the standard brevity penalty. The remaining metrics quantify
the failure modes of zero-shot MT: the rate of empty generation, the
missing entity rate, and a character-trigram language identifier that
labels generations which stayed in the source language.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Mapping, Sequence

from .corpus import SentenceRecord
from .errors import ConfigurationError, ContractViolation

if TYPE_CHECKING:  # circular-import guard: decoder imports nothing from here
    from .decoder import DecodeOutput

MAX_NGRAM_ORDER = 4

# Score contribution of a zero precision: ln is floored far below any real
# log-precision so a single empty order zeroes the geometric mean.
_LOG_ZERO = -9999999999


def _normalize_13a(line: str) -> str:
    norm = line
    norm = norm.replace("<skipped>", "")
    norm = norm.replace("-\n", "")
    norm = norm.replace("\n", " ")
    norm = norm.replace("&quot;", '"')
    norm = norm.replace("&amp;", "&")
    norm = norm.replace("&lt;", "<")
    norm = norm.replace("&gt;", ">")
    norm = f" {norm} "
    norm = re.sub(r"([\{-\~\[-\` -\&\(-\+\:-\@\/])", r" \1 ", norm)
    norm = re.sub(r"([^0-9])([\.,])", r"\1 \2 ", norm)
    norm = re.sub(r"([\.,])([^0-9])", r" \1 \2", norm)
    norm = re.sub(r"([0-9])(-)", r"\1 \2 ", norm)
    norm = re.sub(r"\s+", " ", norm)
    return norm.strip()


def tokenize_13a(text: str) -> list[str]:
    """mteval-13a tokenization: entity unescaping, punctuation padding unless
    digit-adjacent, whitespace collapsing. Case is preserved."""
    return _normalize_13a(text).split()


@dataclass(frozen=True)
class BleuResult:
    score: float
    precisions: tuple[float, float, float, float]  # percentages per order
    brevity_penalty: float
    hyp_len: int
    ref_len: int


def _ngram_counts(tokens: Sequence[str]) -> list[Counter]:
    per_order = []
    for n in range(1, MAX_NGRAM_ORDER + 1):
        per_order.append(Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)))
    return per_order


def _bleu_from_stats(
    correct: Sequence[int], total: Sequence[int], hyp_len: int, ref_len: int
) -> BleuResult:
    precisions = [0.0] * MAX_NGRAM_ORDER
    smooth = 1.0
    for n in range(MAX_NGRAM_ORDER):
        if total[n] == 0:
            break
        if correct[n] == 0:
            smooth *= 2.0
            precisions[n] = 100.0 / (smooth * total[n])
        else:
            precisions[n] = 100.0 * correct[n] / total[n]
    bp = 1.0
    if hyp_len < ref_len:
        bp = math.exp(1 - ref_len / hyp_len) if hyp_len > 0 else 0.0
    log_sum = sum(math.log(p) if p > 0.0 else _LOG_ZERO for p in precisions)
    score = bp * math.exp(log_sum / MAX_NGRAM_ORDER)
    return BleuResult(
        score=score,
        precisions=tuple(precisions),  # type: ignore[arg-type]
        brevity_penalty=bp,
        hyp_len=hyp_len,
        ref_len=ref_len,
    )


def corpus_bleu(hyps: Sequence[str], refs: Sequence[str]) -> BleuResult:
    """Corpus-level cased BLEU over single references, 13a-tokenized, with
    exponential smoothing and the exp(1 - ref/hyp) brevity penalty."""
    if len(hyps) != len(refs):
        raise ContractViolation(f"got {len(hyps)} hypotheses but {len(refs)} references")
    if not hyps:
        raise ContractViolation("corpus_bleu needs at least one sentence pair")
    correct = [0] * MAX_NGRAM_ORDER
    total = [0] * MAX_NGRAM_ORDER
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hyps, refs):
        hyp_toks = tokenize_13a(hyp)
        ref_toks = tokenize_13a(ref)
        hyp_len += len(hyp_toks)
        ref_len += len(ref_toks)
        ref_ngrams = _ngram_counts(ref_toks)
        for n, hyp_counter in enumerate(_ngram_counts(hyp_toks)):
            for ngram, count in hyp_counter.items():
                correct[n] += min(count, ref_ngrams[n].get(ngram, 0))
                total[n] += count
    return _bleu_from_stats(correct, total, hyp_len, ref_len)


def sentence_bleu(hyp: str, ref: str) -> float:
    """The corpus formula applied to a single pair; used for per-sentence
    better/equal/worse comparisons."""
    return corpus_bleu([hyp], [ref]).score


def _collapse_ws(text: str) -> str:
    return " ".join(text.split())


def reg(outputs: Sequence["DecodeOutput"]) -> float:
    """Rate of empty generation, in percent. Errored decodes count as empty."""
    if not outputs:
        raise ContractViolation("reg needs at least one output")
    empty = sum(1 for o in outputs if o.error is not None or not o.text.strip())
    return 100.0 * empty / len(outputs)


def mer(records: Sequence[SentenceRecord], hyps: Sequence[str]) -> float:
    """Missing entity rate, in percent.

    An entity qualifies only when it appears verbatim in the reference (the
    reference decides what should carry over); it is missing when absent
    from the hypothesis. Matching is case-sensitive substring search after
    whitespace normalization, so empty hypotheses miss all their entities.
    Sentences without a qualifying entity are excluded; with none anywhere
    the rate is 0.
    """
    if len(records) != len(hyps):
        raise ContractViolation(f"got {len(records)} records but {len(hyps)} hypotheses")
    total = 0
    missing = 0
    for rec, hyp in zip(records, hyps):
        ref_norm = _collapse_ws(rec.reference)
        hyp_norm = _collapse_ws(hyp)
        for entity in rec.entities:
            ent_norm = _collapse_ws(entity)
            if ent_norm and ent_norm in ref_norm:
                total += 1
                if ent_norm not in hyp_norm:
                    missing += 1
    return 100.0 * missing / total if total else 0.0


class FailureLabel(Enum):
    OK = "ok"
    EMPTY = "empty"
    SOURCE_LANGUAGE = "source-language"


@dataclass(frozen=True)
class LangIdModel:
    """Character-trigram multinomial Naive Bayes with add-1 smoothing."""

    languages: tuple[str, ...]
    log_priors: Mapping[str, float]
    trigram_logprobs: Mapping[str, Mapping[str, float]]
    unseen_logprob: Mapping[str, float]

    def classify(self, text: str) -> str:
        return classify(self, text)


def _trigrams(text: str) -> list[str]:
    return [text[i : i + 3] for i in range(len(text) - 2)]


def train_langid(corpora: Mapping[str, Sequence[str]]) -> LangIdModel:
    """Fit per-language trigram tables from raw sentences."""
    languages = tuple(sorted(corpora))
    if len(languages) < 2:
        raise ConfigurationError(f"language id needs >= 2 languages, got {len(languages)}")
    counts: dict[str, Counter[str]] = {}
    n_sentences: dict[str, int] = {}
    vocab: set[str] = set()
    for lang in languages:
        sentences = corpora[lang]
        if not sentences:
            raise ConfigurationError(f"language {lang!r} has no training sentences")
        counter: Counter[str] = Counter()
        for sent in sentences:
            counter.update(_trigrams(sent))
        counts[lang] = counter
        n_sentences[lang] = len(sentences)
        vocab.update(counter)
    total_sentences = sum(n_sentences.values())
    vocab_size = len(vocab)
    log_priors = {lang: math.log(n_sentences[lang] / total_sentences) for lang in languages}
    trigram_logprobs: dict[str, dict[str, float]] = {}
    unseen: dict[str, float] = {}
    for lang in languages:
        denom = sum(counts[lang].values()) + vocab_size + 1  # +1: one shared unseen slot
        trigram_logprobs[lang] = {
            tri: math.log((c + 1) / denom) for tri, c in counts[lang].items()
        }
        unseen[lang] = math.log(1 / denom)
    return LangIdModel(
        languages=languages,
        log_priors=log_priors,
        trigram_logprobs=trigram_logprobs,
        unseen_logprob=unseen,
    )


def classify(model: LangIdModel, text: str) -> str:
    """Maximum-posterior language; ties break to the alphabetically first
    code (languages are stored sorted)."""
    best_lang = model.languages[0]
    best_score = -math.inf
    for lang in model.languages:
        table = model.trigram_logprobs[lang]
        fallback = model.unseen_logprob[lang]
        score = model.log_priors[lang]
        for tri in _trigrams(text):
            score += table.get(tri, fallback)
        if score > best_score:
            best_score = score
            best_lang = lang
    return best_lang


def failure_label(
    record: SentenceRecord, output: "DecodeOutput", model: LangIdModel
) -> FailureLabel:
    """Empty beats everything; otherwise a generation classified as the
    source language is a failure to translate."""
    if record.source_lang not in model.languages:
        raise ConfigurationError(f"language id model does not cover {record.source_lang!r}")
    if output.error is not None or not output.text.strip():
        return FailureLabel.EMPTY
    if classify(model, output.text) == record.source_lang:
        return FailureLabel.SOURCE_LANGUAGE
    return FailureLabel.OK
