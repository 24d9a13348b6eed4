"""Start the server: ``MODEL_ID=<hf-id-or-toy-json> PORT=8321 python -m logit_server``.

MODEL_ID is either a path to a serialized toy n-gram JSON document (served
locally, no downloads) or any Hugging Face causal-LM identifier. Optional:
DEVICE (default cpu), MAX_BATCH, MAX_CONTEXT, HOST.
"""

from __future__ import annotations

import os
import sys

import uvicorn

from .app import DEFAULT_MAX_BATCH, create_app
from .backends import load_backend


def main() -> int:
    model_id = os.environ.get("MODEL_ID")
    if not model_id:
        print("set MODEL_ID to a toy model JSON path or a causal-LM id", file=sys.stderr)
        return 1
    port = int(os.environ.get("PORT", "8321"))
    host = os.environ.get("HOST", "127.0.0.1")
    max_batch = int(os.environ.get("MAX_BATCH", str(DEFAULT_MAX_BATCH)))
    max_context_env = os.environ.get("MAX_CONTEXT")
    backend = load_backend(
        model_id,
        device=os.environ.get("DEVICE", "cpu"),
        max_context=int(max_context_env) if max_context_env else None,
    )
    app = create_app(backend, max_batch=max_batch)
    uvicorn.run(app, host=host, port=port, log_level="info")
    return 0


if __name__ == "__main__":
    sys.exit(main())
