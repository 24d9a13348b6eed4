import json
import math

import numpy as np
import pytest
import requests

from antilm.decoder import DecodeConfig, beam_decode, greedy_decode
from antilm.errors import InvalidContextError, TransportError
from antilm.lm import NGramLM
from antilm.objectives import ObjectiveSpec
from antilm.corpus import PromptParts
from antilm.remote import RemoteSource, log_normalize
from antilm.wire_mock import WireMockServer


@pytest.fixture(scope="module")
def toy_model():
    return NGramLM.load("tests/data/protocol_model.json")


@pytest.fixture(scope="module")
def server(toy_model):
    with WireMockServer(toy_model, max_batch=4) as srv:
        yield srv


@pytest.fixture()
def remote(server):
    return RemoteSource(server.base_url, timeout=10.0)


def parts_for(model) -> PromptParts:
    return PromptParts(instruction_text="pa", source_text="qo ru",
                       rendered="pa qo ru", instruction_lang="en")


class TestEndpoints:
    def test_info(self, remote, toy_model):
        info = remote.info
        assert info.vocab_size == toy_model.vocab_size
        assert info.eos_id == toy_model.vocab.eos_id
        assert info.normalization == "logprob"
        assert remote.stop_token_ids == toy_model.stop_token_ids

    def test_tokenize_round_trip(self, remote, toy_model):
        ids = remote.tokenize("pa qo ru")
        assert ids == toy_model.tokenize("pa qo ru")
        assert remote.detokenize(ids) == "pa qo ru"

    def test_tokenize_empty(self, remote):
        assert remote.tokenize("") == ()

    def test_logprobs_normalized(self, remote, toy_model):
        ctx = toy_model.tokenize("pa")
        vec = remote.next_logprobs(ctx)
        assert vec.shape == (toy_model.vocab_size,)
        assert abs(np.log(np.sum(np.exp(vec)))) < 1e-9

    def test_logprobs_match_direct(self, remote, toy_model):
        ctx = toy_model.tokenize("pa qo")
        np.testing.assert_allclose(
            remote.next_logprobs(ctx), toy_model.next_logprobs(ctx), atol=1e-12
        )

    def test_batch_chunking_respects_server_limit(self, remote, toy_model):
        # server max_batch=4; ask for 9 contexts in one client call
        ctx = toy_model.tokenize("pa")
        vecs = remote.next_logprobs_many([ctx] * 9)
        assert len(vecs) == 9
        assert all(np.array_equal(v, vecs[0]) for v in vecs)

    def test_bad_token_id_is_invalid_context(self, remote, toy_model):
        with pytest.raises(InvalidContextError):
            remote.next_logprobs([toy_model.vocab_size + 3])

    def test_unreachable_server_is_transport_error(self):
        dead = RemoteSource("http://127.0.0.1:9", timeout=0.2)
        with pytest.raises(TransportError):
            dead.info


class TestDecodeThroughWire:
    def test_greedy_token_identical_to_direct(self, remote, toy_model):
        parts = parts_for(toy_model)
        for name in ("base", "pmi-x", "alm-x"):
            spec = ObjectiveSpec.parse(name)
            direct = greedy_decode(toy_model, spec, parts, DecodeConfig(max_new_tokens=6))
            via_wire = greedy_decode(remote, spec, parts, DecodeConfig(max_new_tokens=6))
            assert via_wire.best.tokens == direct.best.tokens
            assert via_wire.text == direct.text
            assert via_wire.best.score == pytest.approx(direct.best.score, abs=1e-9)

    def test_beam_token_identical_to_direct(self, remote, toy_model):
        parts = parts_for(toy_model)
        spec = ObjectiveSpec.parse("alm-x", 0.3)
        cfg = DecodeConfig(beam_width=5, max_new_tokens=6)
        direct = beam_decode(toy_model, spec, parts, cfg)
        via_wire = beam_decode(remote, spec, parts, cfg)
        assert via_wire.best.tokens == direct.best.tokens
        assert [h.tokens for h in via_wire.all_finished] == [
            h.tokens for h in direct.all_finished
        ]


class TestLogNormalize:
    def test_shifts_to_zero_logsumexp(self):
        vec = np.array([1.0, 2.0, -3.0])
        out = log_normalize(vec)
        assert abs(np.log(np.sum(np.exp(out)))) < 1e-12

    def test_idempotent_on_normalized(self):
        vec = np.log(np.array([0.2, 0.3, 0.5]))
        out = log_normalize(vec)
        np.testing.assert_allclose(out, vec, atol=1e-12)


def run_transcript_step(base_url: str, step: dict, bodies: dict) -> None:
    expect = step["expect"]
    if step["method"] == "GET":
        resp = requests.get(base_url + step["path"], timeout=10)
    else:
        resp = requests.post(base_url + step["path"], json=step.get("body"), timeout=10)
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


class TestProtocolTranscripts:
    def test_mock_server_conforms(self, server, data_dir):
        doc = json.loads((data_dir / "protocol_transcripts.json").read_text())
        bodies: dict = {}
        for step in doc["steps"]:
            run_transcript_step(server.base_url, step, bodies)
