#!/usr/bin/env python3
"""Search random toy instances for two decoder fixtures, then freeze them.

* ``beam_vs_greedy``: an instance where beam search (B=5) returns a strictly
  better-scoring sequence than greedy under the base objective, i.e. the
  greedy path gets pruned along the way.
* ``almx_flip``: an instance where the anti-LM penalty at gamma=0.3 changes
  the very first generated token relative to base.

The winning instances are written to tests/data/decoder_fixtures.json with
the serialized model and prompt parts, so the tests replay them exactly.
"""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))
sys.path.insert(0, str(REPO / "tests"))

from antilm.decoder import DecodeConfig, beam_decode, greedy_decode  # noqa: E402
from antilm.objectives import ObjectiveSpec  # noqa: E402
from toyfactory import random_toy_instance  # noqa: E402

CFG = DecodeConfig(beam_width=5, max_new_tokens=6)


def parts_dict(parts) -> dict:
    return {
        "instruction_text": parts.instruction_text,
        "source_text": parts.source_text,
        "rendered": parts.rendered,
        "instruction_lang": parts.instruction_lang,
    }


def find_beam_vs_greedy(rng: random.Random) -> dict:
    spec = ObjectiveSpec.parse("base")
    for trial in range(100_000):
        inst = random_toy_instance(rng, max_surface=4)
        g = greedy_decode(inst.model, spec, inst.parts, CFG)
        b = beam_decode(inst.model, spec, inst.parts, CFG)
        if (
            g.best.finished
            and b.best.finished
            and b.best.tokens != g.best.tokens
            and b.best.score > g.best.score + 1e-9
        ):
            print(f"beam_vs_greedy found at trial {trial}: "
                  f"greedy={g.best.tokens} ({g.best.score:.4f}) "
                  f"beam={b.best.tokens} ({b.best.score:.4f})")
            return {
                "model": inst.model.to_json_dict(),
                "parts": parts_dict(inst.parts),
                "objective": "base",
                "beam_width": CFG.beam_width,
                "max_new_tokens": CFG.max_new_tokens,
                "greedy_tokens": list(g.best.tokens),
                "beam_tokens": list(b.best.tokens),
            }
    raise SystemExit("no beam-vs-greedy instance found")


def find_almx_flip(rng: random.Random) -> dict:
    base = ObjectiveSpec.parse("base")
    almx = ObjectiveSpec.parse("alm-x", 0.3)
    for trial in range(100_000):
        inst = random_toy_instance(rng, max_surface=4)
        g_base = greedy_decode(inst.model, base, inst.parts, CFG)
        g_almx = greedy_decode(inst.model, almx, inst.parts, CFG)
        if (
            g_base.best.tokens
            and g_almx.best.tokens
            and g_base.best.tokens[0] != g_almx.best.tokens[0]
        ):
            print(f"almx_flip found at trial {trial}: "
                  f"base={g_base.best.tokens} almx={g_almx.best.tokens}")
            return {
                "model": inst.model.to_json_dict(),
                "parts": parts_dict(inst.parts),
                "gamma": 0.3,
                "max_new_tokens": CFG.max_new_tokens,
                "base_tokens": list(g_base.best.tokens),
                "almx_tokens": list(g_almx.best.tokens),
            }
    raise SystemExit("no alm-x flip instance found")


def main() -> None:
    rng = random.Random(1234)
    doc = {
        "beam_vs_greedy": find_beam_vs_greedy(rng),
        "almx_flip": find_almx_flip(rng),
    }
    out = REPO / "tests" / "data" / "decoder_fixtures.json"
    out.write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
