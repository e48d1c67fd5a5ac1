"""Shared exception types.

Errors that cross module boundaries live here; everything inherits from
CowriteError so callers can catch the whole family at once.
"""

from __future__ import annotations


class CowriteError(Exception):
    """Base class for all package errors."""


class DuplicateTransitionError(CowriteError):
    """A suggestion id was already consumed by an earlier transition."""


class StaleFeedbackError(CowriteError):
    """Feedback referenced a suggestion that is not the pending one."""


class EmptySuggestionError(CowriteError):
    """The completion backend returned empty text for a suggestion."""


class CorpusError(CowriteError):
    """An evaluation corpus failed validation; message carries line numbers."""


class BatchFailureError(CowriteError):
    """A batch run exceeded its configured failure-rate ceiling."""


class GatewayError(CowriteError):
    """Base class for LLM gateway failures."""


class GatewayConfigError(GatewayError):
    """Backend configuration is unusable (for example, no API key resolved)."""


class TransportError(GatewayError):
    """The request never produced a usable HTTP response (after retries)."""


class StatusError(GatewayError):
    """The backend answered with a non-success status."""

    def __init__(self, status_code: int, body_excerpt: str):
        super().__init__(f"backend returned HTTP {status_code}: {body_excerpt}")
        self.status_code = status_code
        self.body_excerpt = body_excerpt


class UnscriptedRequestError(GatewayError):
    """A strict mock backend saw a request no script matches."""


class ResponseParseError(CowriteError):
    """A model response could not be parsed into the expected schema.

    Carries the raw response so callers can log or retry with it.
    """

    def __init__(self, message: str, raw_response: str = ""):
        super().__init__(message)
        self.raw_response = raw_response
