"""In-process HTTP server exposing any logit source over the wire protocol.

This is the primary side's reference implementation of the protocol: tests
drive :class:`antilm.remote.RemoteSource` against it end-to-end, and the
shared golden-transcript suite runs against it to pin the wire contract.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .lm import LogitSource

DEFAULT_MAX_BATCH = 64


class WireMockServer:
    """Serve a :class:`LogitSource` on 127.0.0.1 for the lifetime of a
    ``with`` block (or between explicit start/stop calls)."""

    def __init__(
        self,
        source: LogitSource,
        model_name: str = "toy-ngram",
        max_batch: int = DEFAULT_MAX_BATCH,
        port: int = 0,
    ) -> None:
        self.source = source
        self.model_name = model_name
        self.max_batch = max_batch
        self._port = port
        self._httpd: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None

    @property
    def base_url(self) -> str:
        if self._httpd is None:
            raise RuntimeError("server not started")
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def info_dict(self) -> dict:
        eos_candidates = sorted(self.source.stop_token_ids)
        newline_id = None
        if hasattr(self.source, "vocab"):
            vocab = self.source.vocab
            eos_id = vocab.eos_id
            nl = vocab.id_of("\n")
            newline_id = nl if nl is not None and nl >= 0 else None
        else:
            eos_id = eos_candidates[0]
        return {
            "model": self.model_name,
            "vocab_size": self.source.vocab_size,
            "bos_id": None,
            "eos_id": eos_id,
            "newline_id": newline_id,
            "normalization": "logprob",
            "max_batch": self.max_batch,
            "max_context": None,
        }

    def start(self) -> "WireMockServer":
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, fmt: str, *args) -> None:  # silence request log
                pass

            def _send(self, status: int, doc: dict) -> None:
                body = json.dumps(doc).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def _bad(self, message: str) -> None:
                self._send(400, {"error": message})

            def do_GET(self) -> None:
                if self.path == "/info":
                    self._send(200, outer.info_dict())
                else:
                    self._send(404, {"error": f"unknown path {self.path}"})

            def do_POST(self) -> None:
                length = int(self.headers.get("Content-Length", "0"))
                try:
                    payload = json.loads(self.rfile.read(length) or b"{}")
                except json.JSONDecodeError:
                    return self._bad("request body is not valid JSON")
                if self.path == "/tokenize":
                    return self._tokenize(payload)
                if self.path == "/detokenize":
                    return self._detokenize(payload)
                if self.path == "/logprobs":
                    return self._logprobs(payload)
                self._send(404, {"error": f"unknown path {self.path}"})

            def _tokenize(self, payload: dict) -> None:
                if "text" not in payload or not isinstance(payload["text"], str):
                    return self._bad("expected {'text': str}")
                ids = outer.source.tokenize(payload["text"])
                if any(i < 0 for i in ids):
                    return self._bad("text contains reserved context-only markers")
                self._send(200, {"ids": list(ids)})

            def _detokenize(self, payload: dict) -> None:
                ids = payload.get("ids")
                if not isinstance(ids, list) or not all(isinstance(i, int) for i in ids):
                    return self._bad("expected {'ids': [int]}")
                bad = [i for i in ids if not 0 <= i < outer.source.vocab_size]
                if bad:
                    return self._bad(f"token id {bad[0]} out of range")
                self._send(200, {"text": outer.source.detokenize(ids)})

            def _logprobs(self, payload: dict) -> None:
                contexts = payload.get("contexts")
                if not isinstance(contexts, list) or not contexts:
                    return self._bad("expected {'contexts': [[int], ...]} with >= 1 context")
                if len(contexts) > outer.max_batch:
                    return self._bad(f"batch of {len(contexts)} exceeds max_batch {outer.max_batch}")
                for ctx in contexts:
                    if not isinstance(ctx, list) or not ctx:
                        return self._bad("each context must be a non-empty list of ids")
                    bad = [i for i in ctx if not (isinstance(i, int) and 0 <= i < outer.source.vocab_size)]
                    if bad:
                        return self._bad(f"token id {bad[0]} out of range")
                vectors = outer.source.next_logprobs_many([tuple(c) for c in contexts])
                self._send(200, {"vectors": [vec.tolist() for vec in vectors]})

        self._httpd = ThreadingHTTPServer(("127.0.0.1", self._port), Handler)
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        if self._httpd is not None:
            self._httpd.shutdown()
            self._httpd.server_close()
            self._httpd = None
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None

    def __enter__(self) -> "WireMockServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
