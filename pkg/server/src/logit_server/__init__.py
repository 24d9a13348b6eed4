"""HTTP adapter serving a causal LM's tokenizer and next-token
log-probabilities over the logit wire protocol."""

from .app import create_app
from .backends import HFCausalLMBackend, ModelBackend, ToyNGramBackend, load_backend

__version__ = "0.1.0"
