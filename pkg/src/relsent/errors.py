"""Exception taxonomy shared by all relsent modules.

Every failure mode raised by the library derives from RelsentError so
callers (and the CLI) can distinguish library errors from genuine bugs.
"""


class RelsentError(Exception):
    """Base class for all errors raised by relsent."""


class ShapeError(RelsentError):
    """Operands have incompatible dimensions."""


class DegenerateVectorError(RelsentError):
    """A vector with zero norm where a direction is required."""


class DegenerateInputError(RelsentError):
    """Statistically degenerate input, e.g. a constant sequence."""


class ArityError(RelsentError):
    """Empty input where at least one element is required."""


class NumericError(RelsentError):
    """Non-finite value encountered during computation."""


class VocabError(RelsentError):
    """Token id outside the embedding table."""


class EmptyInputError(RelsentError):
    """Empty corpus, sentence, or pair set."""


class StateError(RelsentError):
    """Forward cache and parameters do not belong together."""


class SchemaError(RelsentError):
    """Relation name or field violates the declared schema."""


class ParseError(RelsentError):
    """Malformed input file; message carries the line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class BatchSizeError(RelsentError):
    """Batch too small for the requested contrastive objective."""


class ConfigError(RelsentError):
    """Invalid training or runtime configuration value."""


class NoNegativeAvailableError(RelsentError):
    """Hard-negative pool contains nothing but the gold tail."""


class ProtocolError(RelsentError):
    """Evaluation protocol violated, e.g. gold tail missing from pool."""


class CorruptArtifactError(RelsentError):
    """Model file is truncated, mislabeled, or internally inconsistent."""
