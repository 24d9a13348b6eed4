"""End-to-end: the decoding engine drives this server over real HTTP.

The engine is consumed purely as an installed client of the wire protocol;
skipped when it is not installed alongside.
"""

import socket
import threading
import time
from pathlib import Path

import pytest
import uvicorn

antilm = pytest.importorskip("antilm")

from logit_server.app import create_app  # noqa: E402
from logit_server.backends import ToyNGramBackend  # noqa: E402

DATA_DIR = Path(__file__).resolve().parents[2] / "tests" / "data"


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


@pytest.fixture(scope="module")
def live_server():
    backend = ToyNGramBackend(DATA_DIR / "protocol_model.json")
    port = free_port()
    config = uvicorn.Config(create_app(backend, max_batch=8), host="127.0.0.1",
                            port=port, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 10
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("uvicorn did not start")
        time.sleep(0.02)
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)


def test_engine_decodes_through_live_server(live_server):
    from antilm import DecodeConfig, NGramLM, ObjectiveSpec, RemoteSource, beam_decode, greedy_decode
    from antilm.corpus import PromptParts

    direct = NGramLM.load(DATA_DIR / "protocol_model.json")
    remote = RemoteSource(live_server, timeout=10.0)
    parts = PromptParts(instruction_text="pa", source_text="qo ru",
                        rendered="pa qo ru", instruction_lang="en")
    for name, cfg in (("base", DecodeConfig(max_new_tokens=6)),
                      ("alm-x", DecodeConfig(beam_width=5, max_new_tokens=6))):
        spec = ObjectiveSpec.parse(name)
        decode = greedy_decode if name == "base" else beam_decode
        via_wire = decode(remote, spec, parts, cfg)
        local = decode(direct, spec, parts, cfg)
        assert via_wire.best.tokens == local.best.tokens
        assert via_wire.text == local.text
        assert via_wire.best.score == pytest.approx(local.best.score, abs=1e-9)


def test_single_penalty_query_through_live_server(live_server):
    from antilm import DecodeConfig, ObjectiveSpec, RemoteSource, beam_decode, cached
    from antilm.corpus import PromptParts
    from antilm.objectives import PromptTokens

    remote = cached(RemoteSource(live_server, timeout=10.0))
    parts = PromptParts(instruction_text="pa", source_text="qo ru",
                        rendered="pa qo ru", instruction_lang="en")
    out = beam_decode(remote, ObjectiveSpec.parse("alm-x", 0.3), parts,
                      DecodeConfig(beam_width=5, max_new_tokens=6))
    aux_ctx = PromptTokens.from_parts(remote, parts).source_sentence
    assert remote.calls_for(aux_ctx) == 1
    assert out.stats.aux_underlying == 1
