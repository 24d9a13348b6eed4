"""Exception hierarchy shared across the package.

Transport problems are kept distinct from decode/contract problems so the
runner can keep going after a flaky remote call but still crash loudly on
programming errors.
"""


class DecodeEngineError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(DecodeEngineError):
    """Bad user-supplied configuration (CLI args, config files, model setup)."""


class CorpusFormatError(ConfigurationError):
    """Malformed corpus input; the message names the offending line."""


class InvalidContextError(DecodeEngineError):
    """A token context contains ids that the logit source cannot accept."""


class TransportError(DecodeEngineError):
    """A remote logit source could not be reached or returned a server fault."""


class ContractViolation(DecodeEngineError):
    """Caller broke an API precondition (e.g. mismatched vector lengths)."""
