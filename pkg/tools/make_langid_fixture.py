#!/usr/bin/env python3
"""Build the frozen 100-sentence en/fr corpus used by the language-id tests.

Sentences are assembled deterministically from hand-written clause banks so
the fixture has realistic character statistics in both languages without
shipping third-party text. The measured self-classification accuracy is
pinned into the fixture; the test threshold sits below it.

Usage: python tools/make_langid_fixture.py  (writes tests/data/langid_corpus.jsonl
and tests/data/langid_expected.json)
"""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from antilm.corpus import SentenceRecord, write_jsonl  # noqa: E402
from antilm.metrics import classify, train_langid  # noqa: E402

EN_SUBJECTS = [
    "The old fisherman", "A young engineer", "The city council", "My neighbour",
    "The night train", "A famous painter", "The research team", "Her grandmother",
    "The lighthouse keeper", "An experienced pilot",
]
EN_VERBS = [
    "built", "repaired", "discovered", "painted", "watched", "described",
    "measured", "remembered", "photographed", "announced",
]
EN_OBJECTS = [
    "a wooden bridge across the river", "the ancient clock tower",
    "a small garden behind the house", "the results of the experiment",
    "a letter from the ministry", "the market square at dawn",
    "a map of the northern coast", "the first snow of the winter",
    "a recipe for apple cake", "the lights of the harbour",
]
EN_TAILS = [
    "last summer", "before the storm arrived", "without any help",
    "during the long winter", "after many years abroad", "with great care",
    "despite the heavy rain", "for the annual festival", "in the early morning",
    "while the children slept",
]

FR_SUBJECTS = [
    "Le vieux pêcheur", "Une jeune ingénieure", "Le conseil municipal", "Mon voisin",
    "Le train de nuit", "Un peintre célèbre", "L'équipe de recherche", "Sa grand-mère",
    "Le gardien du phare", "Une pilote expérimentée",
]
FR_VERBS = [
    "a construit", "a réparé", "a découvert", "a peint", "a observé", "a décrit",
    "a mesuré", "a retrouvé", "a photographié", "a annoncé",
]
FR_OBJECTS = [
    "un pont de bois sur la rivière", "la vieille tour de l'horloge",
    "un petit jardin derrière la maison", "les résultats de l'expérience",
    "une lettre du ministère", "la place du marché à l'aube",
    "une carte de la côte du nord", "la première neige de l'hiver",
    "une recette de gâteau aux pommes", "les lumières du port",
]
FR_TAILS = [
    "l'été dernier", "avant l'arrivée de l'orage", "sans aucune aide",
    "pendant le long hiver", "après de longues années à l'étranger", "avec grand soin",
    "malgré la pluie battante", "pour la fête annuelle", "tôt le matin",
    "pendant que les enfants dormaient",
]


def build_records(n: int = 100, seed: int = 7) -> list[SentenceRecord]:
    rng = random.Random(seed)
    records = []
    for i in range(n):
        en = (
            f"{rng.choice(EN_SUBJECTS)} {rng.choice(EN_VERBS)} "
            f"{rng.choice(EN_OBJECTS)} {rng.choice(EN_TAILS)}."
        )
        fr = (
            f"{rng.choice(FR_SUBJECTS)} {rng.choice(FR_VERBS)} "
            f"{rng.choice(FR_OBJECTS)} {rng.choice(FR_TAILS)}."
        )
        records.append(
            SentenceRecord(
                id=f"langid-{i:03d}", source=en, reference=fr,
                source_lang="en", target_lang="fr", entities=(),
            )
        )
    return records


def main() -> None:
    records = build_records()
    model = train_langid(
        {"en": [r.source for r in records], "fr": [r.reference for r in records]}
    )
    total = 0
    correct = 0
    for rec in records:
        total += 2
        correct += classify(model, rec.source) == "en"
        correct += classify(model, rec.reference) == "fr"
    accuracy = 100.0 * correct / total
    out_dir = REPO / "tests" / "data"
    write_jsonl(records, out_dir / "langid_corpus.jsonl")
    (out_dir / "langid_expected.json").write_text(
        json.dumps(
            {"n_records": len(records), "measured_self_accuracy": accuracy,
             "threshold": 95.0},
            indent=2,
        )
        + "\n"
    )
    print(f"{len(records)} records, self-accuracy {accuracy:.2f}%")
    if accuracy < 95.0:
        raise SystemExit("fixture failed its own threshold; adjust clause banks")


if __name__ == "__main__":
    main()
