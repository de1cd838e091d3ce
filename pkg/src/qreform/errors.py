"""Exception hierarchy shared across the toolkit."""


class QreformError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(QreformError):
    """Bad or missing configuration input (files, parameter values)."""


class IngestionError(QreformError):
    """Corpus, topics or qrels input violates a format precondition."""


class UsageError(QreformError):
    """An operation was called in a way its contract forbids."""


class TransportError(QreformError):
    """Generation/scoring service could not be reached; safe to retry."""

    retriable = True


class ProtocolError(QreformError):
    """Service reachable but its response violates the wire protocol."""


class ServiceError(QreformError):
    """Service-reported error, surfaced with the service's message."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message
