import json

import pytest

from antilm.corpus import (
    SentenceRecord,
    instruction_language,
    load_jsonl,
    render_prompt,
    write_jsonl,
)
from antilm.errors import ConfigurationError, CorpusFormatError


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def record_line(rid="r1", **overrides):
    obj = {
        "id": rid,
        "source": "In summer, you'll need to watch out for mosquitoes.",
        "reference": "En été, il faudra faire attention aux moustiques.",
        "source_lang": "en",
        "target_lang": "fr",
        "entities": [],
    }
    obj.update(overrides)
    return json.dumps(obj, ensure_ascii=False)


class TestLoadJsonl:
    def test_loads_in_file_order(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        write_lines(path, [record_line(f"r{i}") for i in range(3)])
        records = load_jsonl(path)
        assert [r.id for r in records] == ["r0", "r1", "r2"]

    def test_malformed_line_names_line_number(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        write_lines(path, [record_line("r0"), "{not json", record_line("r2")])
        with pytest.raises(CorpusFormatError, match="line 2"):
            load_jsonl(path)

    def test_duplicate_id_rejected(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        write_lines(path, [record_line("same"), record_line("same")])
        with pytest.raises(CorpusFormatError, match="duplicate id"):
            load_jsonl(path)

    def test_entities_default_to_empty(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        obj = json.loads(record_line("r0"))
        del obj["entities"]
        write_lines(path, [json.dumps(obj)])
        assert load_jsonl(path)[0].entities == ()

    def test_unknown_fields_ignored(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        write_lines(path, [record_line("r0", comment="extra stuff", split="dev")])
        assert load_jsonl(path)[0].id == "r0"

    def test_missing_field_rejected(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        obj = json.loads(record_line("r0"))
        del obj["reference"]
        write_lines(path, [json.dumps(obj)])
        with pytest.raises(CorpusFormatError, match="reference"):
            load_jsonl(path)

    def test_empty_source_rejected(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        write_lines(path, [record_line("r0", source="  ")])
        with pytest.raises(CorpusFormatError, match="empty source"):
            load_jsonl(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_jsonl(tmp_path / "nope.jsonl")

    def test_round_trip(self, tmp_path):
        records = [
            SentenceRecord(id="a", source="Hello there.", reference="Bonjour.",
                           source_lang="en", target_lang="fr", entities=("Hello",)),
            SentenceRecord(id="b", source="Zwei Dinge.", reference="Two things.",
                           source_lang="de", target_lang="en"),
        ]
        path = tmp_path / "rt.jsonl"
        write_jsonl(records, path)
        assert load_jsonl(path) == records


def basic_record(source_lang="en", target_lang="fr"):
    return SentenceRecord(
        id="x", source="In summer, you'll need to watch out for mosquitoes.",
        reference="En été, il faudra faire attention aux moustiques.",
        source_lang=source_lang, target_lang=target_lang,
    )


class TestRenderPrompt:
    def test_en_fr_basic_worked_example(self):
        parts = render_prompt("basic", basic_record())
        assert parts.rendered == (
            "Translate from English to French: English: "
            "In summer, you'll need to watch out for mosquitoes. French:"
        )
        assert parts.instruction_text == "Translate from English to French:"
        assert parts.source_text == basic_record().source
        assert parts.instruction_lang == "en"

    def test_de_en_instruction_in_german(self):
        record = SentenceRecord(id="d", source="Zwei Dinge.", reference="Two things.",
                                source_lang="de", target_lang="en")
        parts = render_prompt("basic", record)
        assert parts.instruction_text == "Übersetzen Sie vom Deutschen ins Englische:"
        assert parts.instruction_lang == "de"
        assert parts.rendered.startswith(
            "Übersetzen Sie vom Deutschen ins Englische: Deutsch: Zwei Dinge. Englisch:"
        )

    def test_masterful_en_pt(self):
        record = SentenceRecord(id="p", source="Two things.", reference="Duas coisas.",
                                source_lang="en", target_lang="pt")
        parts = render_prompt("masterful", record)
        assert parts.instruction_text.startswith(
            "A English phrase is provided. The masterful English translator"
        )
        assert parts.instruction_text.endswith("into Portuguese:")

    def test_basic_short_variant(self):
        parts = render_prompt("basic-short", basic_record())
        assert parts.instruction_text == "Translate English to French:"

    def test_rendered_ends_at_target_cue(self):
        for template in ("basic", "basic-short", "masterful"):
            parts = render_prompt(template, basic_record())
            assert parts.rendered.endswith(" French:")
            assert parts.source_text in parts.rendered
            assert parts.instruction_text in parts.rendered

    def test_template_does_not_change_instruction_language(self):
        record = SentenceRecord(id="d", source="Zwei Dinge.", reference="Two things.",
                                source_lang="de", target_lang="en")
        basic = render_prompt("basic", record)
        short = render_prompt("basic-short", record)
        assert basic.instruction_lang == short.instruction_lang == "de"

    def test_instruction_language_rule(self):
        assert instruction_language(basic_record("en", "fr")) == "en"
        assert instruction_language(basic_record("fr", "en")) == "fr"
        assert instruction_language(basic_record("pt", "en")) == "pt"

    def test_instruction_lang_override(self):
        parts = render_prompt("basic", basic_record("fr", "en"), instruction_lang="en")
        assert parts.instruction_text == "Translate from French to English:"

    def test_unsupported_pair_needs_custom(self):
        record = SentenceRecord(id="u", source="hola", reference="hello",
                                source_lang="es", target_lang="en")
        with pytest.raises(ConfigurationError):
            render_prompt("basic", record)
        parts = render_prompt(
            "basic", record,
            custom_instruction="Translate from Spanish to English:",
            custom_cues=("Spanish", "English"),
        )
        assert parts.rendered == "Translate from Spanish to English: Spanish: hola English:"

    def test_masterful_has_no_non_english_wording(self):
        record = SentenceRecord(id="d", source="Zwei Dinge.", reference="Two things.",
                                source_lang="de", target_lang="en")
        with pytest.raises(ConfigurationError):
            render_prompt("masterful", record)

    def test_unknown_template_rejected(self):
        with pytest.raises(ConfigurationError):
            render_prompt("fancy", basic_record())

    def test_purity(self):
        assert render_prompt("basic", basic_record()) == render_prompt("basic", basic_record())
