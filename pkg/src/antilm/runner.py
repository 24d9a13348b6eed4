"""Experiment orchestration: fan sentences out over a worker pool, decode
under every configured objective and sampling mode, aggregate metrics, and
emit machine-readable reports.

Reports are written twice: ``report.json`` (full per-sentence rows plus
aggregates) and ``report.tsv`` (one column per objective, one row per
metric and mode, shaped like a results table). Both files are byte-stable:
rerunning an identical configuration, at any parallelism, overwrites them
with identical bytes. Wall-clock timing goes to ``run.log`` instead, which
is the one deliberately non-deterministic artifact.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

from .corpus import SentenceRecord, load_jsonl, render_prompt
from .decoder import DecodeConfig, DecodeOutput, Hypothesis, beam_decode, greedy_decode
from .errors import ConfigurationError, ContractViolation, InvalidContextError, TransportError
from .lm import CachedSource, LogitSource, NGramLM, cached
from .metrics import (
    FailureLabel,
    LangIdModel,
    corpus_bleu,
    failure_label,
    mer,
    reg,
    sentence_bleu,
    train_langid,
)
from .objectives import SWEEP_WEIGHTS, ObjectiveKind, ObjectiveSpec
from .remote import RemoteSource

log = logging.getLogger(__name__)

REPORT_SCHEMA = "antilm-report"
REPORT_VERSION = 1

OBJECTIVE_ORDER = ("base", "pmi-u", "pmi-x", "alm-u", "alm-x")
MODES = ("greedy", "beam")


@dataclass(frozen=True)
class ExperimentConfig:
    corpus: str
    source: Mapping[str, str]  # {"toy": model path} | {"remote": base url}
    objectives: tuple[ObjectiveSpec, ...]
    modes: tuple[str, ...] = ("greedy",)
    decode: DecodeConfig = DecodeConfig()
    template: str = "basic"
    instruction_lang: str | None = None
    custom_instruction: str | None = None
    custom_cues: tuple[str, str] | None = None
    sweep_grid: tuple[float, ...] | None = None
    parallelism: int = 1
    output: str | None = None
    seed: int = 0  # reserved: every code path is deterministic
    transport_error_budget: int | None = None
    cache_capacity: int | None = None

    def __post_init__(self) -> None:
        if not self.objectives:
            raise ConfigurationError("configure at least one objective")
        names = [s.name for s in self.objectives]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"duplicate objectives in config: {names}")
        if self.parallelism < 1:
            raise ConfigurationError(f"parallelism must be >= 1, got {self.parallelism}")
        for mode in self.modes:
            if mode not in MODES:
                raise ConfigurationError(f"unknown mode {mode!r} (expected greedy/beam)")
        if not self.modes:
            raise ConfigurationError("configure at least one decode mode")
        keys = set(self.source)
        if keys not in ({"toy"}, {"remote"}):
            raise ConfigurationError("source must be {'toy': model_path} or {'remote': base_url}")
        families = {s.kind for s in self.objectives if s.kind is not ObjectiveKind.BASE}
        pmi = {k for k in families if k.is_pmi}
        alm = {k for k in families if k.is_alm}
        if self.sweep_grid is not None and len(pmi | alm) > 1:
            raise ConfigurationError("a sweep applies to one contrastive objective at a time")

    @classmethod
    def from_json_file(cls, path: str | Path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        return cls.from_json_dict(doc)

    @classmethod
    def from_json_dict(cls, doc: Mapping) -> "ExperimentConfig":
        if not isinstance(doc, Mapping):
            raise ConfigurationError("config must be a JSON object")
        try:
            objectives = tuple(
                ObjectiveSpec.parse(obj["name"], obj.get("weight"))
                if isinstance(obj, Mapping)
                else ObjectiveSpec.parse(str(obj))
                for obj in doc["objectives"]
            )
            decode_doc = dict(doc.get("decode", {}))
            stop_ids = decode_doc.get("stop_token_ids")
            decode_cfg = DecodeConfig(
                beam_width=int(decode_doc.get("beam_width", 5)),
                max_new_tokens=int(decode_doc.get("max_new_tokens", 128)),
                stop_token_ids=frozenset(stop_ids) if stop_ids is not None else None,
                gamma_origin=str(decode_doc.get("gamma_origin", "one-based")),
            )
            cues = doc.get("custom_cues")
            grid = doc.get("sweep_grid")
            return cls(
                corpus=str(doc["corpus"]),
                source=dict(doc["source"]),
                objectives=objectives,
                modes=tuple(doc.get("modes", ["greedy"])),
                decode=decode_cfg,
                template=str(doc.get("template", "basic")),
                instruction_lang=doc.get("instruction_lang"),
                custom_instruction=doc.get("custom_instruction"),
                custom_cues=tuple(cues) if cues is not None else None,
                sweep_grid=tuple(float(w) for w in grid) if grid is not None else None,
                parallelism=int(doc.get("parallelism", 1)),
                output=doc.get("output"),
                seed=int(doc.get("seed", 0)),
                transport_error_budget=doc.get("transport_error_budget"),
                cache_capacity=doc.get("cache_capacity"),
            )
        except KeyError as exc:
            raise ConfigurationError(f"config missing required field {exc.args[0]!r}") from exc
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"bad config value: {exc}") from exc


def build_source(cfg: ExperimentConfig) -> CachedSource:
    if "toy" in cfg.source:
        base: LogitSource = NGramLM.load(cfg.source["toy"])
    else:
        base = RemoteSource(cfg.source["remote"])
    return cached(base, capacity=cfg.cache_capacity)


@dataclass
class SentenceRow:
    record_id: str
    objective: str
    mode: str
    text: str
    score: float
    finished: bool
    finish_reason: str | None
    failure: str
    sentence_bleu: float
    aux_queries: int
    error: str | None = None

    def to_json_dict(self) -> dict:
        return {
            "id": self.record_id,
            "objective": self.objective,
            "mode": self.mode,
            "text": self.text,
            "score": self.score,
            "finished": self.finished,
            "finish_reason": self.finish_reason,
            "failure": self.failure,
            "sentence_bleu": self.sentence_bleu,
            "aux_queries": self.aux_queries,
            "error": self.error,
        }


@dataclass
class MetricsReport:
    config: ExperimentConfig
    rows: list[SentenceRow]
    aggregates: dict  # mode -> objective -> metrics
    runtime: dict
    wall_seconds: float = 0.0

    def to_json_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "version": REPORT_VERSION,
            "corpus": self.config.corpus,
            "template": self.config.template,
            "modes": list(self.config.modes),
            "objectives": [
                {"name": s.name, "weight": s.weight} for s in self.config.objectives
            ],
            "decode": {
                "beam_width": self.config.decode.beam_width,
                "max_new_tokens": self.config.decode.max_new_tokens,
                "stop_token_ids": sorted(self.config.decode.stop_token_ids)
                if self.config.decode.stop_token_ids is not None
                else None,
                "gamma_origin": self.config.decode.gamma_origin,
            },
            "rows": [row.to_json_dict() for row in self.rows],
            "aggregates": self.aggregates,
            "runtime": self.runtime,
        }


def _objective_sorted(objectives: Sequence[ObjectiveSpec]) -> list[ObjectiveSpec]:
    return sorted(objectives, key=lambda s: OBJECTIVE_ORDER.index(s.name))


def _decode_one(
    source: LogitSource,
    spec: ObjectiveSpec,
    record: SentenceRecord,
    mode: str,
    cfg: ExperimentConfig,
) -> DecodeOutput:
    parts = render_prompt(
        cfg.template,
        record,
        instruction_lang=cfg.instruction_lang,
        custom_instruction=cfg.custom_instruction,
        custom_cues=cfg.custom_cues,
    )
    decode = greedy_decode if mode == "greedy" else beam_decode
    return decode(source, spec, parts, cfg.decode)


def run_experiment(cfg: ExperimentConfig) -> MetricsReport:
    """Decode every record under every objective and mode, label failures,
    and aggregate BLEU/REG/MER/failure counts per (mode, objective)."""
    t_start = time.monotonic()
    for spec in cfg.objectives:
        if spec.outside_sweep_range:
            log.warning(
                "objective %s weight %g is outside the studied range [-0.1, 1.0]",
                spec.name, spec.weight,
            )
    records = load_jsonl(cfg.corpus)
    if not records:
        raise ConfigurationError(f"corpus {cfg.corpus} has no records")
    source = build_source(cfg)
    langid = _train_langid_from_records(records)
    objectives = _objective_sorted(cfg.objectives)
    modes = [m for m in MODES if m in cfg.modes]

    tasks = [
        (record, spec, mode) for record in records for mode in modes for spec in objectives
    ]

    def work(task: tuple[SentenceRecord, ObjectiveSpec, str]) -> tuple[SentenceRecord, ObjectiveSpec, str, DecodeOutput]:
        record, spec, mode = task
        try:
            output = _decode_one(source, spec, record, mode, cfg)
        except (TransportError, InvalidContextError) as exc:
            output = DecodeOutput(
                best=Hypothesis(tokens=(), score=0.0, finished=False, finish_reason=None),
                all_finished=[],
                per_step_scores=[],
                text="",
                error=str(exc),
            )
        return record, spec, mode, output

    if cfg.parallelism == 1:
        results = [work(task) for task in tasks]
    else:
        with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
            results = list(pool.map(work, tasks))

    rows: list[SentenceRow] = []
    outputs: dict[tuple[str, str], list[DecodeOutput]] = {}
    for record, spec, mode, output in results:
        label = failure_label(record, output, langid)
        rows.append(
            SentenceRow(
                record_id=record.id,
                objective=spec.name,
                mode=mode,
                text=output.text,
                score=output.best.score if output.error is None else 0.0,
                finished=output.best.finished,
                finish_reason=output.best.finish_reason,
                failure=label.value,
                sentence_bleu=sentence_bleu(output.text, record.reference),
                aux_queries=output.stats.aux_underlying,
                error=output.error,
            )
        )
        outputs.setdefault((mode, spec.name), []).append(output)

    order = {rec.id: i for i, rec in enumerate(records)}
    obj_rank = {name: i for i, name in enumerate(OBJECTIVE_ORDER)}
    mode_rank = {name: i for i, name in enumerate(MODES)}
    rows.sort(key=lambda r: (r.record_id, obj_rank[r.objective], mode_rank[r.mode]))

    aggregates: dict[str, dict[str, dict]] = {}
    for mode in modes:
        aggregates[mode] = {}
        for spec in objectives:
            cell_rows = sorted(
                (r for r in rows if r.mode == mode and r.objective == spec.name),
                key=lambda r: order[r.record_id],
            )
            recs = sorted(records, key=lambda r: order[r.id])
            texts = [r.text for r in cell_rows]
            failures = {label.value: 0 for label in FailureLabel}
            for r in cell_rows:
                failures[r.failure] += 1
            cell_outputs = outputs[(mode, spec.name)]
            aggregates[mode][spec.name] = {
                "bleu": corpus_bleu(texts, [r.reference for r in recs]).score,
                "reg": reg(cell_outputs),
                "mer": mer(recs, texts),
                "failures": failures,
                "errors": sum(1 for r in cell_rows if r.error is not None),
                "aux_context_queries": sum(r.aux_queries for r in cell_rows),
            }

    runtime = {
        "logit_queries": source.total_queries,
        "underlying_calls": source.underlying_calls,
        "cache_hit_rate": (
            1.0 - source.underlying_calls / source.total_queries
            if source.total_queries
            else 0.0
        ),
    }
    report = MetricsReport(
        config=cfg,
        rows=rows,
        aggregates=aggregates,
        runtime=runtime,
        wall_seconds=time.monotonic() - t_start,
    )
    if cfg.output:
        write_report(report, cfg.output)
    return report


def _train_langid_from_records(records: Sequence[SentenceRecord]) -> LangIdModel:
    corpora: dict[str, list[str]] = {}
    for rec in records:
        corpora.setdefault(rec.source_lang, []).append(rec.source)
        corpora.setdefault(rec.target_lang, []).append(rec.reference)
    return train_langid(corpora)


def write_report(report: MetricsReport, outdir: str | Path) -> None:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    doc = report.to_json_dict()
    (outdir / "report.json").write_text(
        json.dumps(doc, sort_keys=True, ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )
    (outdir / "report.tsv").write_text(report_tsv(report), encoding="utf-8")
    (outdir / "run.log").write_text(
        f"wall_seconds={report.wall_seconds:.3f}\n"
        f"rows={len(report.rows)}\n"
        f"logit_queries={report.runtime['logit_queries']}\n",
        encoding="utf-8",
    )


def report_tsv(report: MetricsReport) -> str:
    """Results-table shape: one column per objective in canonical order,
    one row per (metric, mode)."""
    objectives = [s.name for s in _objective_sorted(report.config.objectives)]
    modes = [m for m in MODES if m in report.config.modes]
    lines = ["\t".join(["metric", "mode"] + objectives)]
    metric_fields = (
        ("bleu", "bleu"),
        ("reg", "reg"),
        ("mer", "mer"),
        ("failures-empty", ("failures", "empty")),
        ("failures-source-language", ("failures", "source-language")),
        ("errors", "errors"),
    )
    for metric_name, accessor in metric_fields:
        for mode in modes:
            values = []
            for obj in objectives:
                cell = report.aggregates[mode][obj]
                value = (
                    cell[accessor]
                    if isinstance(accessor, str)
                    else cell[accessor[0]][accessor[1]]
                )
                values.append(f"{value:.4f}" if isinstance(value, float) else str(value))
            lines.append("\t".join([metric_name, mode] + values))
    return "\n".join(lines) + "\n"


def sweep(cfg: ExperimentConfig, grid: Sequence[float] | None = None) -> list[dict]:
    """Rerun the experiment once per penalty weight and tabulate BLEU.

    The grid defaults to the studied weight set. The configuration must
    contain exactly one contrastive objective; each grid point reruns just
    that objective at the given weight.
    """
    weights = tuple(grid) if grid is not None else (
        cfg.sweep_grid if cfg.sweep_grid is not None else SWEEP_WEIGHTS
    )
    if not weights:
        raise ConfigurationError("sweep grid is empty")
    contrastive = [s for s in cfg.objectives if s.kind is not ObjectiveKind.BASE]
    if len(contrastive) != 1:
        raise ConfigurationError(
            f"sweep needs exactly one contrastive objective, got {len(contrastive)}"
        )
    target = contrastive[0]
    rows: list[dict] = []
    for weight in weights:
        run_cfg = replace(
            cfg,
            objectives=(ObjectiveSpec(kind=target.kind, weight=float(weight)),),
            output=None,
            sweep_grid=None,
        )
        report = run_experiment(run_cfg)
        rows.append(
            {
                "weight": float(weight),
                "objective": target.name,
                "bleu": {
                    mode: report.aggregates[mode][target.name]["bleu"]
                    for mode in report.config.modes
                },
            }
        )
    if cfg.output:
        outdir = Path(cfg.output)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "sweep.json").write_text(
            json.dumps(rows, sort_keys=True, ensure_ascii=False, indent=2) + "\n",
            encoding="utf-8",
        )
        modes = [m for m in MODES if m in cfg.modes]
        lines = ["\t".join(["weight"] + [f"bleu-{m}" for m in modes])]
        for row in rows:
            lines.append(
                "\t".join([f"{row['weight']:g}"] + [f"{row['bleu'][m]:.4f}" for m in modes])
            )
        (outdir / "sweep.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return rows


def _select_rows(report: Mapping, key: tuple[str, str] | None, which: str) -> dict[str, Mapping]:
    combos = sorted({(r["objective"], r["mode"]) for r in report["rows"]})
    if key is None:
        if len(combos) != 1:
            raise ConfigurationError(
                f"report {which} holds {len(combos)} (objective, mode) combinations; "
                f"pick one of {combos}"
            )
        key = combos[0]
    elif key not in combos:
        raise ConfigurationError(f"report {which} has no rows for {key}")
    return {r["id"]: r for r in report["rows"] if (r["objective"], r["mode"]) == key}


def compare_failures(
    report_a: Mapping,
    report_b: Mapping,
    threshold_bleu: float = 5.0,
    a_key: tuple[str, str] | None = None,
    b_key: tuple[str, str] | None = None,
) -> dict:
    """Per-sentence comparison of two runs over the same corpus.

    Sentences failing to translate in either run are set aside and reported
    as proportions; the rest are classified better/equal/worse for A by
    whether the sentence-BLEU difference exceeds ``threshold_bleu``.
    """
    rows_a = _select_rows(report_a, a_key, "A")
    rows_b = _select_rows(report_b, b_key, "B")
    if set(rows_a) != set(rows_b):
        raise ContractViolation("reports cover different sentence id sets")
    ids = sorted(rows_a)
    n = len(ids)
    failure_ids = [
        i for i in ids if rows_a[i]["failure"] != "ok" or rows_b[i]["failure"] != "ok"
    ]
    clean_ids = [i for i in ids if i not in set(failure_ids)]
    better = equal = worse = 0
    for i in clean_ids:
        delta = rows_a[i]["sentence_bleu"] - rows_b[i]["sentence_bleu"]
        if delta > threshold_bleu:
            better += 1
        elif delta < -threshold_bleu:
            worse += 1
        else:
            equal += 1
    n_clean = len(clean_ids)
    return {
        "threshold_bleu": threshold_bleu,
        "n": n,
        "failures": {
            "either": len(failure_ids) / n,
            "a": sum(1 for i in ids if rows_a[i]["failure"] != "ok") / n,
            "b": sum(1 for i in ids if rows_b[i]["failure"] != "ok") / n,
        },
        "non_failure": {
            "n": n_clean,
            "better": better / n_clean if n_clean else 0.0,
            "equal": equal / n_clean if n_clean else 0.0,
            "worse": worse / n_clean if n_clean else 0.0,
        },
    }
