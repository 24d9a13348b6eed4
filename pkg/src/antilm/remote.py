"""HTTP client for the logit-serving wire protocol.

The protocol is three endpoints speaking JSON:

    GET  /info                          -> {"model", "vocab_size", "bos_id",
                                            "eos_id", "newline_id",
                                            "normalization", "max_batch",
                                            "max_context"}
    POST /tokenize   {"text": str}      -> {"ids": [int]}
    POST /detokenize {"ids": [int]}     -> {"text": str}
    POST /logprobs   {"contexts": [[int]]} -> {"vectors": [[float]]}

Servers send log-probabilities, but every received vector is renormalized
(log-softmax) client-side anyway so the objectives always operate on true
log-probabilities regardless of transported precision.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import requests

from .errors import InvalidContextError, TransportError
from .lm import LogitSource, TokenSeq


@dataclass(frozen=True)
class ServerInfo:
    model: str
    vocab_size: int
    eos_id: int
    bos_id: int | None = None
    newline_id: int | None = None
    normalization: str = "logprob"
    max_batch: int = 64
    max_context: int | None = None


def log_normalize(vec: np.ndarray) -> np.ndarray:
    """Shift a score vector so that logsumexp is exactly zero."""
    m = float(np.max(vec))
    return vec - (m + float(np.log(np.sum(np.exp(vec - m)))))


class RemoteSource(LogitSource):
    """A remote model behind the wire protocol, presented as a plain
    logit source. Safe for concurrent use (one HTTP session per thread)."""

    def __init__(self, base_url: str, timeout: float = 60.0) -> None:
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._local = threading.local()
        self._info: ServerInfo | None = None
        self._info_lock = threading.Lock()

    def _session(self) -> requests.Session:
        session = getattr(self._local, "session", None)
        if session is None:
            session = requests.Session()
            self._local.session = session
        return session

    def _request(self, method: str, path: str, payload: dict | None = None) -> dict:
        url = f"{self.base_url}{path}"
        try:
            if method == "GET":
                resp = self._session().get(url, timeout=self.timeout)
            else:
                resp = self._session().post(url, json=payload, timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(f"{method} {url}: {exc}") from exc
        if resp.status_code == 400:
            raise InvalidContextError(f"{method} {path}: {_error_text(resp)}")
        if resp.status_code != 200:
            raise TransportError(f"{method} {path}: HTTP {resp.status_code}: {_error_text(resp)}")
        try:
            return resp.json()
        except ValueError as exc:
            raise TransportError(f"{method} {path}: non-JSON response") from exc

    @property
    def info(self) -> ServerInfo:
        if self._info is None:
            with self._info_lock:
                if self._info is None:
                    doc = self._request("GET", "/info")
                    try:
                        self._info = ServerInfo(
                            model=str(doc["model"]),
                            vocab_size=int(doc["vocab_size"]),
                            eos_id=int(doc["eos_id"]),
                            bos_id=doc.get("bos_id"),
                            newline_id=doc.get("newline_id"),
                            normalization=str(doc.get("normalization", "logprob")),
                            max_batch=int(doc.get("max_batch", 64)),
                            max_context=doc.get("max_context"),
                        )
                    except (KeyError, TypeError, ValueError) as exc:
                        raise TransportError(f"malformed /info response: {doc!r}") from exc
        return self._info

    @property
    def vocab_size(self) -> int:
        return self.info.vocab_size

    @property
    def stop_token_ids(self) -> frozenset[int]:
        info = self.info
        stops = {info.eos_id}
        if info.newline_id is not None:
            stops.add(int(info.newline_id))
        return frozenset(stops)

    def tokenize(self, text: str) -> TokenSeq:
        doc = self._request("POST", "/tokenize", {"text": text})
        return tuple(int(i) for i in doc["ids"])

    def detokenize(self, ids: Sequence[int]) -> str:
        doc = self._request("POST", "/detokenize", {"ids": [int(i) for i in ids]})
        return str(doc["text"])

    def next_logprobs(self, context: Sequence[int]) -> np.ndarray:
        return self.next_logprobs_many([context])[0]

    def next_logprobs_many(self, contexts: Sequence[Sequence[int]]) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        batch_size = max(1, self.info.max_batch)
        contexts = [list(ctx) for ctx in contexts]
        for start in range(0, len(contexts), batch_size):
            chunk = contexts[start : start + batch_size]
            doc = self._request("POST", "/logprobs", {"contexts": chunk})
            vectors = doc.get("vectors")
            if not isinstance(vectors, list) or len(vectors) != len(chunk):
                raise TransportError(
                    f"/logprobs returned {len(vectors) if isinstance(vectors, list) else 'no'} "
                    f"vectors for {len(chunk)} contexts"
                )
            for vec in vectors:
                arr = np.asarray(vec, dtype=np.float64)
                if arr.shape != (self.vocab_size,):
                    raise TransportError(
                        f"/logprobs vector length {arr.shape} != vocab_size {self.vocab_size}"
                    )
                arr = log_normalize(arr)
                arr.setflags(write=False)
                out.append(arr)
        return out


def _error_text(resp: requests.Response) -> str:
    try:
        doc = resp.json()
        if isinstance(doc, dict) and "error" in doc:
            return str(doc["error"])
    except ValueError:
        pass
    return resp.text[:200]
