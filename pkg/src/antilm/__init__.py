"""Model-agnostic contrastive decoding engine for zero-shot machine
translation, with an evaluation harness for BLEU and failure analysis."""

from .corpus import PromptParts, SentenceRecord, load_jsonl, render_prompt, write_jsonl
from .decoder import (
    DecodeConfig,
    DecodeOutput,
    Hypothesis,
    beam_decode,
    exhaustive_argmax,
    greedy_decode,
)
from .errors import (
    ConfigurationError,
    ContractViolation,
    CorpusFormatError,
    DecodeEngineError,
    InvalidContextError,
    TransportError,
)
from .lm import (
    BOS_ID,
    BOS_TOKEN,
    EOS_TOKEN,
    UNK_TOKEN,
    CachedSource,
    LogitSource,
    NGramLM,
    Vocabulary,
    cached,
    detokenize_toy,
    tokenize_toy,
    train_ngram,
)
from .metrics import (
    BleuResult,
    FailureLabel,
    LangIdModel,
    classify,
    corpus_bleu,
    failure_label,
    mer,
    reg,
    sentence_bleu,
    tokenize_13a,
    train_langid,
)
from .objectives import (
    SWEEP_WEIGHTS,
    AlmPenalty,
    ObjectiveKind,
    ObjectiveSpec,
    PromptTokens,
    StepContexts,
    adjust,
    alm_penalty,
    penalty_weight,
    required_contexts,
)
from .remote import RemoteSource, ServerInfo, log_normalize
from .runner import ExperimentConfig, MetricsReport, compare_failures, run_experiment, sweep
from .wire_mock import WireMockServer

__version__ = "0.1.0"
