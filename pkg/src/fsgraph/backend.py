"""Uniform chat-completion client for LLM/VLM backends.

One request/response shape serves every model the pipeline talks to. The
HTTP backend speaks OpenAI-compatible chat completions (images as base64
data URLs); the replay backend answers from recorded fixtures keyed by a
canonical request digest, which makes whole pipeline runs reproducible
bit for bit. Cache files use the fixture format, so a recorded live run
doubles as a replay fixture set.
"""
from __future__ import annotations

import base64
import json
import logging
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import requests

from .errors import BackendUnreachable, RateLimited, ReplayMiss
from .jsonutil import atomic_write_text, canonical_dumps, sha256_hex

logger = logging.getLogger(__name__)

ROLES = ("system", "user")


@dataclass(frozen=True)
class ImagePayload:
    data: bytes = field(repr=False)
    media_type: str = "image/png"


@dataclass(frozen=True)
class ModelRequest:
    """Role-tagged chat messages plus optional image attachments."""

    messages: tuple[tuple[str, str], ...]
    images: tuple[ImagePayload, ...] = ()
    model_hint: str = "llm"
    temperature: float = 0.0
    max_tokens: int = 1024

    def __post_init__(self):
        if not self.messages:
            raise ValueError("a request needs at least one message")
        for role, _ in self.messages:
            if role not in ROLES:
                raise ValueError(f"unknown role {role!r}")
        if self.images and self.model_hint != "vlm":
            raise ValueError("images are only permitted on vlm requests")
        object.__setattr__(self, "messages", tuple((r, t) for r, t in self.messages))
        object.__setattr__(self, "images", tuple(self.images))


@dataclass(frozen=True)
class ModelResponse:
    text: str
    backend_id: str
    cached: bool
    latency_ms: float


@dataclass(frozen=True)
class CanonicalRequestKey:
    digest: str


def canonical_key(request: ModelRequest) -> CanonicalRequestKey:
    """Content digest of the request, stable across runs and platforms.

    Message order is semantic, so messages are serialized as an ordered
    list; image bytes enter through their own sha256.
    """
    payload = {
        "messages": [[role, text] for role, text in request.messages],
        "images": [
            {"media_type": im.media_type, "sha256": sha256_hex(im.data)}
            for im in request.images
        ],
        "model_hint": request.model_hint,
        "temperature": request.temperature,
        "max_tokens": request.max_tokens,
    }
    return CanonicalRequestKey(sha256_hex(canonical_dumps(payload, indent=None).encode("utf-8")))


def request_summary(request: ModelRequest) -> dict:
    """Human-readable fixture header; not part of the digest."""
    return {
        "model_hint": request.model_hint,
        "n_images": len(request.images),
        "messages": [
            {"role": role, "text": text if len(text) <= 2000 else text[:2000] + "..."}
            for role, text in request.messages
        ],
    }


class Backend(Protocol):
    backend_id: str

    def complete_raw(self, request: ModelRequest) -> str: ...


class ReplayBackend:
    """Answers requests from `<digest>.json` fixture files; a miss is a
    hard error so accidental nondeterminism cannot slip through."""

    def __init__(self, fixture_dir: str | Path):
        self.fixture_dir = Path(fixture_dir)
        self.backend_id = f"replay:{self.fixture_dir.name}"

    def complete_raw(self, request: ModelRequest) -> str:
        digest = canonical_key(request).digest
        path = self.fixture_dir / f"{digest}.json"
        if not path.is_file():
            raise ReplayMiss(f"no replay fixture for digest {digest} in {self.fixture_dir}")
        return json.loads(path.read_text())["response_text"]


@dataclass
class RetryPolicy:
    attempts: int = 3
    delays: tuple[float, ...] = (1.0, 2.0, 4.0)

    def delay_for(self, attempt: int) -> float:
        if attempt < len(self.delays):
            return self.delays[attempt]
        return self.delays[-1] if self.delays else 0.0


RETRIABLE_STATUS = frozenset({429} | set(range(500, 600)))


class HttpBackend:
    """OpenAI-compatible chat-completions client with retry/backoff."""

    def __init__(
        self,
        base_url: str,
        model_names: dict[str, str],
        api_key: str | None = None,
        timeout: float = 60.0,
        retry: RetryPolicy | None = None,
        session: requests.Session | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model_names = model_names
        self.api_key = api_key
        self.timeout = timeout
        self.retry = retry or RetryPolicy()
        self.session = session or requests.Session()
        self.backend_id = f"http:{self.base_url}"

    def _payload(self, request: ModelRequest) -> dict:
        messages = [{"role": role, "content": text} for role, text in request.messages]
        if request.images:
            # attach images to the last user message as data-URL parts
            last = messages[-1]
            parts = [{"type": "text", "text": last["content"]}]
            for im in request.images:
                url = f"data:{im.media_type};base64,{base64.b64encode(im.data).decode('ascii')}"
                parts.append({"type": "image_url", "image_url": {"url": url}})
            last["content"] = parts
        return {
            "model": self.model_names.get(request.model_hint, request.model_hint),
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }

    def complete_raw(self, request: ModelRequest) -> str:
        url = f"{self.base_url}/chat/completions"
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = self._payload(request)
        last_error: Exception | None = None
        last_status: int | None = None
        for attempt in range(self.retry.attempts):
            if attempt:
                time.sleep(self.retry.delay_for(attempt - 1))
            try:
                resp = self.session.post(url, json=payload, headers=headers, timeout=self.timeout)
            except requests.RequestException as exc:
                last_error, last_status = exc, None
                logger.warning("backend request failed (attempt %d): %r", attempt + 1, exc)
                continue
            if resp.status_code in RETRIABLE_STATUS:
                last_error, last_status = None, resp.status_code
                logger.warning("backend returned %d (attempt %d)", resp.status_code, attempt + 1)
                continue
            resp.raise_for_status()
            return resp.json()["choices"][0]["message"]["content"]
        if last_status == 429:
            raise RateLimited(f"{url} kept answering 429 after {self.retry.attempts} attempts")
        raise BackendUnreachable(
            f"{url} unreachable after {self.retry.attempts} attempts: "
            f"{last_error if last_error is not None else f'status {last_status}'}"
        )


class ModelClient:
    """Shareable completion handle: caching, replay, bounded concurrency.

    At most `max_in_flight` requests are outstanding against the wrapped
    backend at any time; cache writes are atomic so parallel callers never
    see partial fixture files.
    """

    def __init__(self, backend: Backend, cache_dir: str | Path | None = None, max_in_flight: int = 4):
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        self.backend = backend
        self.cache_dir = Path(cache_dir) if cache_dir is not None else None
        self._gate = threading.BoundedSemaphore(max_in_flight)

    def _cache_path(self, digest: str) -> Path | None:
        if self.cache_dir is None:
            return None
        return self.cache_dir / f"{digest}.json"

    def complete(self, request: ModelRequest) -> ModelResponse:
        digest = canonical_key(request).digest
        cache_path = self._cache_path(digest)
        if cache_path is not None and cache_path.is_file():
            text = json.loads(cache_path.read_text())["response_text"]
            return ModelResponse(text=text, backend_id=self.backend.backend_id,
                                 cached=True, latency_ms=0.0)
        start = time.monotonic()
        with self._gate:
            text = self.backend.complete_raw(request)
        latency_ms = (time.monotonic() - start) * 1000.0
        if not text:
            raise BackendUnreachable(f"{self.backend.backend_id} returned an empty completion")
        if cache_path is not None:
            record = {"request_summary": request_summary(request), "response_text": text}
            atomic_write_text(cache_path, canonical_dumps(record) + "\n")
        return ModelResponse(text=text, backend_id=self.backend.backend_id,
                             cached=False, latency_ms=latency_ms)
