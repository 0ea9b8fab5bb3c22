"""Exception types shared across the package."""


class BlockmutError(Exception):
    """Base class for all package errors."""


class ParseError(BlockmutError):
    """Malformed model source text."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        self.message = message
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")


class SchemaError(BlockmutError):
    """Structurally valid input that violates the documented schema."""


class UnknownSiteError(BlockmutError):
    """A mask site does not resolve to a (block, property) in the model."""


class EmptyCorpusError(BlockmutError):
    """Corpus construction was given no models."""


class InvalidModelError(BlockmutError):
    """Operation requires a model that passes validation."""


class MaskRequestError(BlockmutError):
    """Prediction request without exactly one mask placeholder."""


class PredictorUnavailable(BlockmutError):
    """Remote predictor unreachable after retries."""

    def __init__(self, message: str, partial=None):
        self.partial = partial
        super().__init__(message)


class ProtocolError(BlockmutError):
    """Response from a predictor service violates the wire protocol."""


class UnknownSignalError(BlockmutError):
    """A requirement references a signal the trace does not carry."""
