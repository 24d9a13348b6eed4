import json
import math
import os
from pathlib import Path

import pytest

from logit_server.backends import ToyNGramBackend, load_backend

DATA_DIR = Path(__file__).resolve().parents[2] / "tests" / "data"
MODEL_PATH = DATA_DIR / "protocol_model.json"


@pytest.fixture(scope="module")
def backend() -> ToyNGramBackend:
    return ToyNGramBackend(MODEL_PATH)


class TestToyBackend:
    def test_vectors_are_normalized(self, backend):
        for ctx in ([backend.eos_id], backend.tokenize("pa qo"), backend.tokenize("ru")):
            vec = backend.next_logprobs([ctx])[0]
            m = max(vec)
            lse = m + math.log(sum(math.exp(x - m) for x in vec))
            assert abs(lse) < 1e-9

    def test_add_k_closed_form(self, backend):
        doc = json.loads(MODEL_PATH.read_text())
        ids = backend.tokenize("pa")
        vec = backend.next_logprobs([ids])[0]
        per_tok = doc["counts"].get("pa", {})
        total = sum(per_tok.values())
        denom = total + doc["k"] * len(doc["vocab"])
        for idx, token in enumerate(doc["vocab"]):
            expected = (per_tok.get(token, 0) + doc["k"]) / denom
            assert math.exp(vec[idx]) == pytest.approx(expected, rel=1e-12)

    def test_tokenize_round_trip(self, backend):
        ids = backend.tokenize("pa qo ru")
        assert backend.detokenize(ids) == "pa qo ru"

    def test_unknown_word_uses_unk(self, backend):
        ids = backend.tokenize("xyzzy")
        assert ids == [backend.vocab.index("<unk>")]

    def test_rejects_foreign_document(self, tmp_path):
        path = tmp_path / "other.json"
        path.write_text(json.dumps({"format": "something"}))
        with pytest.raises(ValueError):
            ToyNGramBackend(path)

    def test_load_backend_picks_toy_for_json(self):
        backend = load_backend(str(MODEL_PATH))
        assert isinstance(backend, ToyNGramBackend)


@pytest.mark.skipif(
    "LOGIT_SERVER_HF_MODEL" not in os.environ,
    reason="set LOGIT_SERVER_HF_MODEL to a local causal-LM path to exercise "
    "the transformers backend",
)
class TestHFBackend:
    def test_smoke(self):
        backend = load_backend(os.environ["LOGIT_SERVER_HF_MODEL"])
        ids = backend.tokenize("Translate from English to French: English: Hello. French:")
        assert ids and all(0 <= i < backend.vocab_size for i in ids)
        vec = backend.next_logprobs([ids])[0]
        assert len(vec) == backend.vocab_size
        m = max(vec)
        lse = m + math.log(sum(math.exp(x - m) for x in vec))
        assert abs(lse) < 1e-4
