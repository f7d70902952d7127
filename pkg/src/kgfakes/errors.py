"""Exception taxonomy shared across the package.

Every error the pipeline can surface to a user derives from KgfakesError and
carries a short ``category`` slug; the CLI prints it as ``error: <category>:
<message>`` so failures stay greppable in batch logs.
"""

from __future__ import annotations


class KgfakesError(Exception):
    """Base class for all domain errors raised by this package."""

    category = "error"


class ParseError(KgfakesError):
    """A line in an input file does not match its documented format."""

    category = "parse"

    def __init__(self, message: str, *, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class EncodingError(ParseError):
    """Input bytes are not valid UTF-8."""

    category = "encoding"


class EmptyGraphError(KgfakesError):
    """No triples survived parsing and filtering."""

    category = "empty-graph"


class NotAFactError(KgfakesError):
    """A seed triple is not present in the graph."""

    category = "not-a-fact"


class InvalidCandidateError(KgfakesError):
    """A proposed fake object is not in the seed's candidate set."""

    category = "invalid-candidate"


class UndefinedSimilarityError(KgfakesError):
    """Jaccard similarity of two empty sets has no value."""

    category = "undefined-similarity"


class TemplateError(KgfakesError):
    """A prompt template or one of its required fields is unusable."""

    category = "template"


class GatewayError(KgfakesError):
    """Base class for completion-endpoint failures."""

    category = "gateway"


class TransportError(GatewayError):
    """Retries exhausted against a transient failure."""

    category = "transport"

    def __init__(self, message: str, *, status: int | None = None):
        super().__init__(message)
        self.status = status


class RequestError(GatewayError):
    """The endpoint rejected the request; retrying would not help."""

    category = "request"

    def __init__(self, message: str, *, status: int | None = None):
        super().__init__(message)
        self.status = status


class ProtocolError(GatewayError):
    """The endpoint answered with a body we cannot interpret."""

    category = "protocol"


class ConsistencyError(KgfakesError):
    """Cross-referenced artifacts disagree (dangling ids, duplicates)."""

    category = "consistency"


class ConfigError(KgfakesError):
    """Run configuration is missing or contradictory."""

    category = "config"
