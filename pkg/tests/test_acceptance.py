"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line and enforcing its runtime budget.

Criteria 1-9 run entirely against the deterministic toy stack. Criterion 10
(directional check through the standalone logit server wrapping a real
multilingual causal LM) is hardware- and download-dependent and reports as
a skip here; see server/README.md for how to run it against a live model.
"""

import json
import os
import random
import time
from pathlib import Path

import pytest

from antilm.corpus import SentenceRecord, load_jsonl
from antilm.decoder import DecodeConfig, beam_decode, exhaustive_argmax, greedy_decode
from antilm.lm import cached
from antilm.metrics import corpus_bleu, mer, reg
from antilm.objectives import SWEEP_WEIGHTS, ObjectiveSpec, PromptTokens
from antilm.runner import ExperimentConfig, run_experiment, sweep

from test_metrics import output_with
from toyfactory import random_toy_instance

BENCH = Path("tests/data/toy_benchmark")
CONTRASTIVE = ("pmi-u", "pmi-x", "alm-u", "alm-x")


class Budget:
    def __init__(self, criterion: str, seconds: float):
        self.criterion = criterion
        self.seconds = seconds

    def __enter__(self):
        self.start = time.monotonic()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.monotonic() - self.start
        status = "PASS" if exc_type is None else "FAIL"
        print(f"criterion {self.criterion}: {status} ({elapsed:.2f}s, budget {self.seconds}s)")
        if exc_type is None:
            assert elapsed < self.seconds, (
                f"criterion {self.criterion} exceeded its {self.seconds}s budget: {elapsed:.2f}s"
            )


def bench_config(**kw) -> ExperimentConfig:
    defaults = dict(
        corpus=str(BENCH / "corpus.jsonl"),
        source={"toy": str(BENCH / "model.json")},
        objectives=(ObjectiveSpec.parse("base"), ObjectiveSpec.parse("alm-x", 0.3)),
        modes=("greedy",),
    )
    defaults.update(kw)
    return ExperimentConfig(**defaults)


def failure_rate(report, objective: str) -> float:
    cell = report.aggregates["greedy"][objective]["failures"]
    total = sum(cell.values())
    return 100.0 * (cell["empty"] + cell["source-language"]) / total


def test_criterion_1_zero_weight_identity():
    with Budget("1 (zero-weight identity)", 10.0):
        rng = random.Random(101)
        greedy_cfg = DecodeConfig(beam_width=1, max_new_tokens=8)
        beam_cfg = DecodeConfig(beam_width=5, max_new_tokens=8)
        for _ in range(100):
            inst = random_toy_instance(rng)
            base_greedy = greedy_decode(inst.model, ObjectiveSpec.parse("base"),
                                        inst.parts, greedy_cfg)
            base_beam = beam_decode(inst.model, ObjectiveSpec.parse("base"),
                                    inst.parts, beam_cfg)
            for name in CONTRASTIVE:
                zero = ObjectiveSpec.parse(name, 0.0)
                g = greedy_decode(inst.model, zero, inst.parts, greedy_cfg)
                b = beam_decode(inst.model, zero, inst.parts, beam_cfg)
                assert g.best.tokens == base_greedy.best.tokens
                assert b.best.tokens == base_beam.best.tokens


def test_criterion_2_saturating_beam_equals_oracle():
    with Budget("2 (oracle optimality)", 30.0):
        rng = random.Random(202)
        max_len = 4
        for _ in range(25):
            inst = random_toy_instance(rng, max_surface=3)  # |V| <= 4 with eos
            assert inst.model.vocab_size <= 4
            width = inst.model.vocab_size ** max_len
            cfg = DecodeConfig(beam_width=width, max_new_tokens=max_len)
            for name in ("base",) + CONTRASTIVE:
                spec = (ObjectiveSpec.parse(name) if name == "base"
                        else ObjectiveSpec.parse(name, rng.choice((0.1, 0.3, 0.5))))
                beam = beam_decode(inst.model, spec, inst.parts, cfg)
                oracle = exhaustive_argmax(inst.model, spec, inst.parts, max_len, cfg)
                assert beam.best.tokens == oracle.tokens, (name, inst.parts)


def test_criterion_3_beam_width_one_equals_greedy():
    with Budget("3 (B=1 degeneracy)", 10.0):
        rng = random.Random(303)
        cfg = DecodeConfig(beam_width=1, max_new_tokens=8)
        for _ in range(50):
            inst = random_toy_instance(rng)
            for name in ("base",) + CONTRASTIVE:
                spec = (ObjectiveSpec.parse(name) if name == "base"
                        else ObjectiveSpec.parse(name, rng.choice((0.1, 0.3, 1.0))))
                g = greedy_decode(inst.model, spec, inst.parts, cfg)
                b = beam_decode(inst.model, spec, inst.parts, cfg)
                assert b.best.tokens == g.best.tokens


def test_criterion_4_alm_query_economy():
    with Budget("4 (single aux query per sentence)", 5.0):
        from antilm.corpus import render_prompt
        from antilm.lm import NGramLM

        records = load_jsonl(BENCH / "corpus.jsonl")[:8]
        model = NGramLM.load(BENCH / "model.json")
        for name in ("alm-x", "alm-u"):
            spec = ObjectiveSpec.parse(name, 0.3)
            for cfg in (DecodeConfig(beam_width=1, max_new_tokens=8),
                        DecodeConfig(beam_width=5, max_new_tokens=8)):
                src = cached(model)
                for record in records:
                    parts = render_prompt("basic", record)
                    before = src.underlying_calls
                    out = (greedy_decode if cfg.beam_width == 1 else beam_decode)(
                        src, spec, parts, cfg)
                    aux_ctx = (PromptTokens.from_parts(src, parts).source_sentence
                               if name == "alm-x"
                               else PromptTokens.from_parts(src, parts).instruction)
                    assert src.calls_for(aux_ctx) == 1
                    assert out.stats.aux_underlying == 1


def test_criterion_5_bleu_conformance(data_dir):
    with Budget("5 (BLEU conformance)", 5.0):
        doc = json.loads((data_dir / "bleu_golden.json").read_text())
        hand = [c for c in doc["cases"] if not c["name"].startswith("random-")]
        randomized = [c for c in doc["cases"] if c["name"].startswith("random-")]
        assert len(hand) == 5 and len(randomized) == 20
        for case in doc["cases"]:
            got = corpus_bleu(case["hyps"], case["refs"]).score
            assert abs(got - case["expected_score"]) < 1e-6, case["name"]


def test_criterion_6_regurgitation_rescue(data_dir):
    with Budget("6 (failure-to-translate rescue)", 60.0):
        expected = json.loads((data_dir / "toy_benchmark" / "expected.json").read_text())
        report = run_experiment(bench_config())
        base_rate = failure_rate(report, "base")
        almx_rate = failure_rate(report, "alm-x")
        assert base_rate == expected["base_failure_rate"]
        assert almx_rate == expected["almx_failure_rate"]
        assert base_rate >= expected["base_min_rate"]
        assert almx_rate <= base_rate * expected["almx_max_fraction_of_base"]


def test_criterion_7_sweep_structure():
    with Budget("7 (sweep grid and zero extension)", 60.0):
        cfg = bench_config(objectives=(ObjectiveSpec.parse("alm-x", 0.3),))
        rows = sweep(cfg)
        assert [row["weight"] for row in rows] == [-0.1, 0.1, 0.3, 0.5, 0.8, 1.0]
        assert tuple(row["weight"] for row in rows) == SWEEP_WEIGHTS
        zero = sweep(cfg, grid=[0.0])
        base = run_experiment(bench_config(objectives=(ObjectiveSpec.parse("base"),)))
        assert zero[0]["bleu"]["greedy"] == base.aggregates["greedy"]["base"]["bleu"]


def test_criterion_8_parallel_determinism(tmp_path):
    with Budget("8 (byte-identical reports across parallelism)", 60.0):
        out1 = tmp_path / "par1"
        out8 = tmp_path / "par8"
        run_experiment(bench_config(parallelism=1, output=str(out1)))
        run_experiment(bench_config(parallelism=8, output=str(out8)))
        for name in ("report.json", "report.tsv"):
            assert (out1 / name).read_bytes() == (out8 / name).read_bytes(), name


def test_criterion_9_metrics_algebra():
    with Budget("9 (REG/MER hand ratios)", 5.0):
        outputs = [output_with("")] * 2 + [output_with("some text")] * 8
        assert reg(outputs) == 20.0
        records = [
            SentenceRecord(id="1", source="Ehud Ur built it.", reference="Ehud Ur l'a construit.",
                           source_lang="en", target_lang="fr", entities=("Ehud Ur",)),
            SentenceRecord(id="2", source="Alice met Bob.", reference="Alice a rencontré Bob.",
                           source_lang="en", target_lang="fr", entities=("Alice", "Bob")),
        ]
        hyps = ["Quelqu'un l'a construit.", "Alice a rencontré Bob."]
        assert mer(records, hyps) == 100.0 / 3.0
        assert mer(records, [records[0].reference, records[1].reference]) == 0.0


@pytest.mark.skipif(
    not (os.environ.get("ANTILM_REAL_MODEL_URL") and os.environ.get("ANTILM_REAL_CORPUS")),
    reason="criterion 10 needs a live logit server wrapping a real multilingual "
    "causal LM plus an en->fr corpus; set ANTILM_REAL_MODEL_URL and "
    "ANTILM_REAL_CORPUS (see server/README.md), otherwise criteria 1-9 stand alone",
)
def test_criterion_10_real_model_directional_check():
    """Directional check: through the wire protocol, alm-x (gamma=0.3, greedy)
    must not fail to translate more often than base, with zero protocol errors."""
    with Budget("10 (real-model directional check)", 24 * 3600.0):
        cfg = ExperimentConfig(
            corpus=os.environ["ANTILM_REAL_CORPUS"],
            source={"remote": os.environ["ANTILM_REAL_MODEL_URL"]},
            objectives=(ObjectiveSpec.parse("base"), ObjectiveSpec.parse("alm-x", 0.3)),
            modes=("greedy",),
        )
        report = run_experiment(cfg)
        base = report.aggregates["greedy"]["base"]
        almx = report.aggregates["greedy"]["alm-x"]
        assert base["errors"] == 0 and almx["errors"] == 0
        base_failures = base["failures"]["empty"] + base["failures"]["source-language"]
        almx_failures = almx["failures"]["empty"] + almx["failures"]["source-language"]
        assert almx_failures <= base_failures
