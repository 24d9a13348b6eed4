"""Evaluation corpora and prompt construction.

Corpora are JSONL, one record per line, with the exact keys
``{"id", "source", "reference", "source_lang", "target_lang", "entities"}``.
Prompt rendering follows the zero-shot instruction convention: the
instruction sentence, then a source-language cue, the sentence to translate,
and finally the target-language cue where generation begins, e.g.

    Translate from English to French: English: <x> French:

Instructions are given in English when translating out of English and in
the source language otherwise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .errors import ConfigurationError, CorpusFormatError

CORPUS_KEYS = ("id", "source", "reference", "source_lang", "target_lang", "entities")


@dataclass(frozen=True)
class SentenceRecord:
    """One parallel sentence with optional precomputed entity annotations."""

    id: str
    source: str
    reference: str
    source_lang: str
    target_lang: str
    entities: tuple[str, ...] = ()


@dataclass(frozen=True)
class PromptParts:
    """A rendered model input and the pieces the objectives condition on."""

    instruction_text: str
    source_text: str
    rendered: str
    instruction_lang: str


def load_jsonl(path: str | Path) -> list[SentenceRecord]:
    """Strict JSONL parse; unknown fields are ignored, defects name the line."""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"corpus file not found: {path}")
    records: list[SentenceRecord] = []
    seen_ids: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{path}: line {lineno}: invalid JSON ({exc.msg})")
            if not isinstance(obj, dict):
                raise CorpusFormatError(f"{path}: line {lineno}: expected a JSON object")
            for key in ("id", "source", "reference", "source_lang", "target_lang"):
                if key not in obj:
                    raise CorpusFormatError(f"{path}: line {lineno}: missing field {key!r}")
            rec_id = str(obj["id"])
            if rec_id in seen_ids:
                raise CorpusFormatError(f"{path}: line {lineno}: duplicate id {rec_id!r}")
            seen_ids.add(rec_id)
            source = str(obj["source"])
            reference = str(obj["reference"])
            if not source.strip():
                raise CorpusFormatError(f"{path}: line {lineno}: empty source")
            if not reference.strip():
                raise CorpusFormatError(f"{path}: line {lineno}: empty reference")
            entities = obj.get("entities", [])
            if not isinstance(entities, list) or not all(isinstance(e, str) for e in entities):
                raise CorpusFormatError(f"{path}: line {lineno}: entities must be a list of strings")
            records.append(
                SentenceRecord(
                    id=rec_id,
                    source=source,
                    reference=reference,
                    source_lang=str(obj["source_lang"]),
                    target_lang=str(obj["target_lang"]),
                    entities=tuple(entities),
                )
            )
    return records


def write_jsonl(records: Iterable[SentenceRecord], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for rec in records:
            obj = {
                "id": rec.id,
                "source": rec.source,
                "reference": rec.reference,
                "source_lang": rec.source_lang,
                "target_lang": rec.target_lang,
                "entities": list(rec.entities),
            }
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


# Language names for the supported pairs, per instruction language. The cue
# names label the source/target sentences inside the prompt scaffold.
CUE_NAMES: dict[str, dict[str, str]] = {
    "en": {"en": "English", "fr": "French", "de": "German", "pt": "Portuguese"},
    "fr": {"en": "Anglais", "fr": "Français", "de": "Allemand", "pt": "Portugais"},
    "de": {"en": "Englisch", "fr": "Französisch", "de": "Deutsch", "pt": "Portugiesisch"},
    "pt": {"en": "Inglês", "fr": "Francês", "de": "Alemão", "pt": "Português"},
}

# Grammatical forms needed inside the non-English instruction sentences.
_FR_FROM = {"en": "de l'anglais", "fr": "du français", "de": "de l'allemand", "pt": "du portugais"}
_FR_TO = {"en": "l'anglais", "fr": "le français", "de": "l'allemand", "pt": "le portugais"}
_DE_FROM = {"en": "Englischen", "fr": "Französischen", "de": "Deutschen", "pt": "Portugiesischen"}
_DE_TO = {"en": "Englische", "fr": "Französische", "de": "Deutsche", "pt": "Portugiesische"}
_PT_NAME = {"en": "inglês", "fr": "francês", "de": "alemão", "pt": "português"}

TEMPLATE_IDS = ("basic", "basic-short", "masterful")


def _basic_instruction(instruction_lang: str, src: str, tgt: str, short: bool) -> str:
    if instruction_lang == "en":
        names = CUE_NAMES["en"]
        if short:
            return f"Translate {names[src]} to {names[tgt]}:"
        return f"Translate from {names[src]} to {names[tgt]}:"
    if instruction_lang == "fr":
        return f"Traduisez {_FR_FROM[src]} vers {_FR_TO[tgt]}:"
    if instruction_lang == "de":
        return f"Übersetzen Sie vom {_DE_FROM[src]} ins {_DE_TO[tgt]}:"
    if instruction_lang == "pt":
        return f"Traduza do {_PT_NAME[src]} para o {_PT_NAME[tgt]}:"
    raise ConfigurationError(f"no built-in instruction wording for language {instruction_lang!r}")


def _masterful_instruction(instruction_lang: str, src: str, tgt: str) -> str:
    if instruction_lang != "en":
        raise ConfigurationError(
            "the masterful template has no built-in non-English wording; "
            "pass a custom instruction instead"
        )
    names = CUE_NAMES["en"]
    return (
        f"A {names[src]} phrase is provided. The masterful {names[src]} "
        f"translator flawlessly translates the phrase into {names[tgt]}:"
    )


def instruction_language(record: SentenceRecord) -> str:
    """English when translating out of English, else the source language."""
    return "en" if record.source_lang == "en" else record.source_lang


def render_prompt(
    template_id: str,
    record: SentenceRecord,
    instruction_lang: str | None = None,
    custom_instruction: str | None = None,
    custom_cues: tuple[str, str] | None = None,
) -> PromptParts:
    """Render the full model input for one record.

    ``custom_instruction``/``custom_cues`` bypass the built-in wording and
    name tables for language pairs outside {en, fr, de, pt}.
    """
    lang = instruction_lang or instruction_language(record)
    src, tgt = record.source_lang, record.target_lang

    if custom_instruction is not None:
        instruction = custom_instruction
    elif template_id == "basic":
        instruction = _basic_instruction(lang, src, tgt, short=False)
    elif template_id == "basic-short":
        instruction = _basic_instruction(lang, src, tgt, short=True)
    elif template_id == "masterful":
        instruction = _masterful_instruction(lang, src, tgt)
    else:
        raise ConfigurationError(
            f"unknown template {template_id!r} (expected one of: {', '.join(TEMPLATE_IDS)})"
        )

    if custom_cues is not None:
        src_cue, tgt_cue = custom_cues
    else:
        try:
            src_cue = CUE_NAMES[lang][src]
            tgt_cue = CUE_NAMES[lang][tgt]
        except KeyError as exc:
            raise ConfigurationError(
                f"no built-in language names for pair {src!r}->{tgt!r} in {lang!r}; "
                "pass custom_cues"
            ) from exc

    rendered = f"{instruction} {src_cue}: {record.source} {tgt_cue}:"
    return PromptParts(
        instruction_text=instruction,
        source_text=record.source,
        rendered=rendered,
        instruction_lang=lang,
    )
