"""Bounded-parallelism dispatch of prompts to a chat-completions endpoint.

Two providers speak the same contract: an HTTP provider for any endpoint that
accepts the usual messages/temperature/max_tokens JSON body, and an offline
mock that serves canned responses keyed on prompt fingerprints. Transient
failures (timeouts, 429, 5xx) are retried with jittered exponential backoff;
other 4xx responses fail immediately.
"""

from __future__ import annotations

import json
import logging
import os
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence, Union

import requests

from .errors import (
    ConfigError,
    GatewayError,
    ProtocolError,
    RequestError,
    TransportError,
)
from .prompts import PromptText

logger = logging.getLogger(__name__)

TOKEN_ENV_VAR = "LLM_API_TOKEN"
MIN_MAX_TOKENS = 16
MOCK_DEFAULT_KEY = "*"


@dataclass(frozen=True)
class CompletionRequest:
    """One prompt plus decoding parameters, identified by a unique id."""

    prompt: PromptText
    model_name: str
    temperature: float
    max_tokens: int
    request_id: str

    def __post_init__(self):
        if self.max_tokens < MIN_MAX_TOKENS:
            raise ValueError(f"max_tokens must be at least {MIN_MAX_TOKENS}")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if not self.request_id:
            raise ValueError("request_id must be non-empty")


@dataclass(frozen=True)
class CompletionResult:
    request_id: str
    raw_text: str
    latency: float
    attempt_count: int
    provider: str  # "remote" or "mock"


@dataclass(frozen=True)
class CompletionFailure:
    """Per-request error entry inside a batch result."""

    request_id: str
    kind: str
    message: str
    attempt_count: int


BatchEntry = Union[CompletionResult, CompletionFailure]


@dataclass(frozen=True)
class EndpointConfig:
    """Where and how to send requests; exactly one of base_url/mock_path is set."""

    base_url: str | None = None
    mock_path: str | Path | None = None
    completions_path: str = "/v1/chat/completions"
    timeout: float = 60.0
    max_attempts: int = 5
    backoff_base: float = 1.0
    backoff_factor: float = 2.0

    def __post_init__(self):
        if (self.base_url is None) == (self.mock_path is None):
            raise ConfigError("configure exactly one of base_url or mock_path")
        if self.max_attempts < 1:
            raise ConfigError("max_attempts must be at least 1")


class _Transient(Exception):
    """Internal marker for failures worth retrying."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


@dataclass(frozen=True)
class _CannedFailure:
    message: str


class MockProvider:
    """Serves canned responses from a fingerprint-to-text map.

    The map may carry a ``"*"`` entry as a wildcard default, and any value may
    be ``{"error": "..."}`` to simulate a failing request. ``on_request`` is a
    test hook called before every lookup.
    """

    kind = "mock"

    def __init__(
        self,
        responses: dict[str, str | _CannedFailure],
        default: str | _CannedFailure | None = None,
        on_request: Callable[[CompletionRequest], None] | None = None,
    ):
        self.responses = responses
        self.default = default
        self.on_request = on_request

    @classmethod
    def from_file(cls, path: str | Path) -> "MockProvider":
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
        if not isinstance(data, dict):
            raise ConfigError(f"mock response file {path} must hold a JSON object")
        responses: dict[str, str | _CannedFailure] = {}
        default: str | _CannedFailure | None = None
        for key, value in data.items():
            if isinstance(value, str):
                parsed: str | _CannedFailure = value
            elif isinstance(value, dict) and isinstance(value.get("error"), str):
                parsed = _CannedFailure(value["error"])
            else:
                raise ConfigError(
                    f"mock response for {key!r} must be a string or"
                    " an object with an 'error' string"
                )
            if key == MOCK_DEFAULT_KEY:
                default = parsed
            else:
                responses[key] = parsed
        return cls(responses, default)

    def request_text(self, req: CompletionRequest) -> str:
        if self.on_request is not None:
            self.on_request(req)
        value = self.responses.get(req.prompt.fingerprint, self.default)
        if value is None:
            raise RequestError(
                f"no canned response for fingerprint {req.prompt.fingerprint}"
            )
        if isinstance(value, _CannedFailure):
            raise RequestError(f"canned failure: {value.message}")
        return value


class HttpProvider:
    """Single-attempt HTTP transport; the retry loop lives in complete()."""

    kind = "remote"

    def __init__(self, config: EndpointConfig, session=None):
        self.config = config
        self.session = session if session is not None else requests.Session()
        self.url = config.base_url.rstrip("/") + config.completions_path
        self.headers = {"Content-Type": "application/json"}
        token = os.environ.get(TOKEN_ENV_VAR)
        if token:
            self.headers["Authorization"] = f"Bearer {token}"

    def request_text(self, req: CompletionRequest) -> str:
        body = {
            "model": req.model_name,
            "messages": req.prompt.as_messages(),
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        }
        try:
            response = self.session.post(
                self.url, json=body, headers=self.headers, timeout=self.config.timeout
            )
        except requests.RequestException as exc:
            raise _Transient(f"connection failure: {exc}") from exc
        status = response.status_code
        if status == 429 or status >= 500:
            raise _Transient(f"endpoint answered status {status}", status=status)
        if status >= 400:
            raise RequestError(
                f"endpoint rejected the request with status {status}", status=status
            )
        try:
            payload = response.json()
            text = payload["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(
                f"response body does not carry choices[0].message.content ({exc})"
            ) from exc
        if not isinstance(text, str):
            raise ProtocolError("completion content is not a string")
        return text


Provider = Union[MockProvider, HttpProvider]


def make_provider(endpoint: EndpointConfig) -> Provider:
    if endpoint.mock_path is not None:
        return MockProvider.from_file(endpoint.mock_path)
    return HttpProvider(endpoint)


def complete(
    req: CompletionRequest,
    endpoint: EndpointConfig,
    provider: Provider | None = None,
) -> CompletionResult:
    """Send one request, retrying transient failures with jittered backoff.

    Backoff doubles per attempt from ``backoff_base`` seconds with a random
    factor in [0.5, 1.0]; after ``max_attempts`` transient failures the last
    one surfaces as TransportError. Non-retryable failures raise immediately
    with the attempt they happened on recorded on the exception.
    """
    if provider is None:
        provider = make_provider(endpoint)
    started = time.perf_counter()
    last: _Transient | None = None
    for attempt in range(1, endpoint.max_attempts + 1):
        try:
            text = provider.request_text(req)
        except _Transient as exc:
            last = exc
            logger.debug(
                "request %s attempt %d/%d failed transiently: %s",
                req.request_id,
                attempt,
                endpoint.max_attempts,
                exc,
            )
            if attempt < endpoint.max_attempts and endpoint.backoff_base > 0:
                delay = endpoint.backoff_base * endpoint.backoff_factor ** (attempt - 1)
                time.sleep(delay * random.uniform(0.5, 1.0))
            continue
        except GatewayError as exc:
            exc.attempt_count = attempt
            raise
        return CompletionResult(
            request_id=req.request_id,
            raw_text=text,
            latency=time.perf_counter() - started,
            attempt_count=attempt,
            provider=provider.kind,
        )
    error = TransportError(
        f"retries exhausted after {endpoint.max_attempts} attempts: {last}",
        status=last.status if last is not None else None,
    )
    error.attempt_count = endpoint.max_attempts
    raise error


def complete_batch(
    reqs: Sequence[CompletionRequest],
    endpoint: EndpointConfig,
    parallelism: int = 1,
    provider: Provider | None = None,
) -> list[BatchEntry]:
    """Dispatch a batch; entries line up with requests index for index.

    At most ``parallelism`` requests are in flight at once. A failing request
    becomes a CompletionFailure entry at its own index and never aborts the
    rest of the batch.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be at least 1")
    ids = [req.request_id for req in reqs]
    if len(set(ids)) != len(ids):
        raise ValueError("request ids must be unique within a batch")
    if not reqs:
        return []
    if provider is None:
        provider = make_provider(endpoint)

    def one(req: CompletionRequest) -> BatchEntry:
        try:
            return complete(req, endpoint, provider=provider)
        except GatewayError as exc:
            logger.warning("request %s failed: %s", req.request_id, exc)
            return CompletionFailure(
                request_id=req.request_id,
                kind=exc.category,
                message=str(exc),
                attempt_count=getattr(exc, "attempt_count", 1),
            )

    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(one, reqs))
