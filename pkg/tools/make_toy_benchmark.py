#!/usr/bin/env python3
"""Construct the frozen toy bilingual benchmark that reproduces the
failure-to-translate rescue at desk scale.

Two disjoint-vocabulary toy languages are labelled en (words over the
letters z/u/r/a) and fr (words over m/i/l/o). The trigram toy LM is trained
on prompt-formatted lines whose continuation after the target cue is biased
toward copying the source sentence, with a per-record margin between the
copy token and the correct first target token:

  * 12 records have a copy margin smaller than the anti-LM penalty swing at
    gamma=0.3, so base greedy copies (failure) while alm-x flips to the
    target language;
  * 2 records have a margin too large to flip (both objectives fail);
  * 6 records prefer the correct continuation outright (both succeed).

Base greedy therefore fails on 14/20 records and alm-x on 2/20. The script
verifies both rates through the real experiment pipeline and pins them into
tests/data/toy_benchmark/expected.json alongside the corpus and the
serialized model.
"""

from __future__ import annotations

import json
import sys
from itertools import product
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from antilm.corpus import SentenceRecord, write_jsonl  # noqa: E402
from antilm.lm import train_ngram  # noqa: E402
from antilm.metrics import FailureLabel  # noqa: E402
from antilm.runner import ExperimentConfig, run_experiment  # noqa: E402
from antilm.objectives import ObjectiveSpec  # noqa: E402

N_RECORDS = 20
ORDER = 3
K = 0.01
GAMMA = 0.3

# (copy_count, correct_count) per record: the margin ln((c+k)/(d+k)) against
# the ~2 nat anti-LM swing decides the outcome class.
PROFILES = (
    [(3, 1)] * 6 + [(4, 1)] * 4 + [(5, 2)] * 2  # flip: base fails, alm-x rescues
    + [(25, 1)] * 2                              # stubborn: both fail
    + [(1, 4)] * 6                               # clean: both succeed
)


def make_words() -> tuple[list[str], list[str]]:
    src = [p + a + b for p in ("zu", "ra", "ur", "az") for a, b in product("arzu", repeat=2)]
    tgt = [p + a + b for p in ("mi", "lo", "om", "il") for a, b in product("olmi", repeat=2)]
    return src, tgt


def build() -> tuple[list[SentenceRecord], list[str]]:
    src_words, tgt_words = make_words()
    assert len(PROFILES) == N_RECORDS
    records: list[SentenceRecord] = []
    lines: list[str] = []
    for i, (copy_n, correct_n) in enumerate(PROFILES):
        s = [src_words[3 * i], src_words[3 * i + 1], src_words[3 * i + 2]]
        t = [tgt_words[3 * i], tgt_words[3 * i + 1], tgt_words[3 * i + 2]]
        source = " ".join(s)
        reference = " ".join(t)
        records.append(
            SentenceRecord(
                id=f"toy-{i:02d}", source=source, reference=reference,
                source_lang="en", target_lang="fr", entities=(),
            )
        )
        prompt = (
            f"Translate from English to French: English: {source} French:"
        )
        lines.extend([f"{prompt} {source}"] * copy_n)        # regurgitation bias
        lines.extend([f"{prompt} {reference}"] * correct_n)  # correct continuation
        # Source-language chains: make the continuation of x peak on the
        # copy token, which is exactly what the anti-LM penalty subtracts.
        lines.extend([f"{source} {source} {source}"] * 4)
        lines.extend([f"{reference} {reference}"] * 2)
    return records, lines


def main() -> None:
    out_dir = REPO / "tests" / "data" / "toy_benchmark"
    out_dir.mkdir(parents=True, exist_ok=True)
    records, lines = build()
    model = train_ngram(lines, order=ORDER, k=K, include_unk=True)
    write_jsonl(records, out_dir / "corpus.jsonl")
    model.save(out_dir / "model.json")

    cfg = ExperimentConfig(
        corpus=str(out_dir / "corpus.jsonl"),
        source={"toy": str(out_dir / "model.json")},
        objectives=(ObjectiveSpec.parse("base"), ObjectiveSpec.parse("alm-x", GAMMA)),
        modes=("greedy",),
    )
    report = run_experiment(cfg)

    def failure_rate(objective: str) -> float:
        cell = report.aggregates["greedy"][objective]["failures"]
        bad = cell[FailureLabel.EMPTY.value] + cell[FailureLabel.SOURCE_LANGUAGE.value]
        return 100.0 * bad / len(records)

    base_rate = failure_rate("base")
    almx_rate = failure_rate("alm-x")
    print(f"base greedy failure rate:  {base_rate:.1f}%")
    print(f"alm-x greedy failure rate: {almx_rate:.1f}%")
    if base_rate < 50.0 or almx_rate > base_rate / 2.0:
        raise SystemExit("benchmark does not meet the pinned thresholds; retune PROFILES")

    (out_dir / "expected.json").write_text(
        json.dumps(
            {
                "n_records": len(records),
                "gamma": GAMMA,
                "order": ORDER,
                "k": K,
                "base_failure_rate": base_rate,
                "almx_failure_rate": almx_rate,
                "base_min_rate": 50.0,
                "almx_max_fraction_of_base": 0.5,
            },
            indent=2,
        )
        + "\n"
    )
    print(f"fixture written to {out_dir}")


if __name__ == "__main__":
    main()
