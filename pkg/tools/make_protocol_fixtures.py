#!/usr/bin/env python3
"""Freeze the shared wire-protocol conformance fixtures.

Writes the canonical toy model both protocol implementations serve during
conformance testing, plus a transcript of requests with expected statuses
and response checks. The transcript is interpreted by the test suites of
the in-process mock server and of the standalone logit server, so the two
implementations are pinned to the same contract.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from antilm.lm import train_ngram  # noqa: E402

CORPUS = ["pa qo ru", "qo pa", "ru ru pa", "pa qo"]


def main() -> None:
    model = train_ngram(CORPUS, order=2, k=0.5, include_unk=True)
    out_dir = REPO / "tests" / "data"
    model.save(out_dir / "protocol_model.json")
    vocab = model.vocab
    ids_pa_qo = [vocab.id_of("pa"), vocab.id_of("qo")]
    steps = [
        {
            "name": "info-shape",
            "method": "GET",
            "path": "/info",
            "expect": {
                "status": 200,
                "required_keys": ["model", "vocab_size", "eos_id", "normalization"],
                "field_equals": {"vocab_size": model.vocab_size, "eos_id": vocab.eos_id,
                                 "normalization": "logprob"},
            },
        },
        {
            "name": "info-stable",
            "method": "GET",
            "path": "/info",
            "expect": {"status": 200, "same_body_as": "info-shape"},
        },
        {
            "name": "tokenize-basic",
            "method": "POST",
            "path": "/tokenize",
            "body": {"text": "pa qo"},
            "expect": {"status": 200, "equals": {"ids": ids_pa_qo}},
        },
        {
            "name": "tokenize-empty",
            "method": "POST",
            "path": "/tokenize",
            "body": {"text": ""},
            "expect": {"status": 200, "equals": {"ids": []}},
        },
        {
            "name": "detokenize-roundtrip",
            "method": "POST",
            "path": "/detokenize",
            "body": {"ids": ids_pa_qo},
            "expect": {"status": 200, "equals": {"text": "pa qo"}},
        },
        {
            "name": "detokenize-out-of-range",
            "method": "POST",
            "path": "/detokenize",
            "body": {"ids": [model.vocab_size + 7]},
            "expect": {"status": 400},
        },
        {
            "name": "logprobs-batch",
            "method": "POST",
            "path": "/logprobs",
            "body": {"contexts": [ids_pa_qo, [vocab.id_of("ru")]]},
            "expect": {
                "status": 200,
                "vector_count": 2,
                "vector_len": model.vocab_size,
                "normalized_within": 1e-4,
            },
        },
        {
            "name": "logprobs-deterministic",
            "method": "POST",
            "path": "/logprobs",
            "body": {"contexts": [ids_pa_qo, [vocab.id_of("ru")]]},
            "expect": {"status": 200, "same_body_as": "logprobs-batch"},
        },
        {
            "name": "logprobs-empty-context",
            "method": "POST",
            "path": "/logprobs",
            "body": {"contexts": [[]]},
            "expect": {"status": 400},
        },
        {
            "name": "logprobs-no-contexts",
            "method": "POST",
            "path": "/logprobs",
            "body": {"contexts": []},
            "expect": {"status": 400},
        },
        {
            "name": "logprobs-bad-id",
            "method": "POST",
            "path": "/logprobs",
            "body": {"contexts": [[model.vocab_size + 1]]},
            "expect": {"status": 400},
        },
    ]
    doc = {"model_file": "protocol_model.json", "steps": steps}
    (out_dir / "protocol_transcripts.json").write_text(
        json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    print(f"wrote transcripts with {len(steps)} steps; vocab_size={model.vocab_size}")


if __name__ == "__main__":
    main()
