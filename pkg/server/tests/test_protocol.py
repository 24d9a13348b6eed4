"""Wire-protocol conformance: the shared golden transcript suite plus
endpoint edge cases, run against the toy backend through the real ASGI app.
"""

import json
import math
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from logit_server.app import create_app
from logit_server.backends import ToyNGramBackend

DATA_DIR = Path(__file__).resolve().parents[2] / "tests" / "data"


@pytest.fixture(scope="module")
def backend() -> ToyNGramBackend:
    return ToyNGramBackend(DATA_DIR / "protocol_model.json")


@pytest.fixture(scope="module")
def client(backend) -> TestClient:
    return TestClient(create_app(backend, max_batch=4))


def run_transcript_step(client: TestClient, step: dict, bodies: dict) -> None:
    expect = step["expect"]
    if step["method"] == "GET":
        resp = client.get(step["path"])
    else:
        resp = client.post(step["path"], json=step.get("body"))
    assert resp.status_code == expect["status"], f"{step['name']}: {resp.text}"
    if resp.status_code != 200:
        return
    body = resp.json()
    bodies[step["name"]] = body
    if "equals" in expect:
        assert body == expect["equals"], step["name"]
    if "required_keys" in expect:
        assert set(expect["required_keys"]) <= set(body), step["name"]
    if "field_equals" in expect:
        for key, value in expect["field_equals"].items():
            assert body[key] == value, f"{step['name']}: {key}"
    if "same_body_as" in expect:
        assert body == bodies[expect["same_body_as"]], step["name"]
    if "vector_count" in expect:
        assert len(body["vectors"]) == expect["vector_count"], step["name"]
    if "vector_len" in expect:
        assert all(len(v) == expect["vector_len"] for v in body["vectors"]), step["name"]
    if "normalized_within" in expect:
        tol = expect["normalized_within"]
        for vec in body["vectors"]:
            m = max(vec)
            lse = m + math.log(sum(math.exp(x - m) for x in vec))
            assert abs(lse) < tol, step["name"]


class TestSharedTranscripts:
    def test_conformance(self, client):
        doc = json.loads((DATA_DIR / "protocol_transcripts.json").read_text())
        bodies: dict = {}
        for step in doc["steps"]:
            run_transcript_step(client, step, bodies)


class TestEdgeCases:
    def test_info_vocab_size_matches_vectors(self, client, backend):
        info = client.get("/info").json()
        assert info["vocab_size"] == backend.vocab_size > 0
        assert 0 <= info["eos_id"] < info["vocab_size"]
        vec = client.post("/logprobs", json={"contexts": [[info["eos_id"]]]}).json()
        assert len(vec["vectors"][0]) == info["vocab_size"]

    def test_batch_over_limit_rejected(self, client, backend):
        ctx = [backend.eos_id]
        resp = client.post("/logprobs", json={"contexts": [ctx] * 5})
        assert resp.status_code == 400
        assert "max_batch" in resp.json()["error"]

    def test_malformed_body_is_400(self, client):
        resp = client.post("/tokenize", json={"no_text": 1})
        assert resp.status_code == 400
        assert "error" in resp.json()

    def test_tokenize_maps_unknown_words(self, client, backend):
        resp = client.post("/tokenize", json={"text": "pa notaword"})
        assert resp.status_code == 200
        ids = resp.json()["ids"]
        assert len(ids) == 2
        assert all(0 <= i < backend.vocab_size for i in ids)

    def test_repeated_logprobs_identical(self, client, backend):
        body = {"contexts": [[backend.eos_id], [backend.eos_id, backend.eos_id]]}
        one = client.post("/logprobs", json=body).json()
        two = client.post("/logprobs", json=body).json()
        assert one == two
