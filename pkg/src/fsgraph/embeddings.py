"""Text embedding backends for label and relation retrieval.

Two spaces exist: "label" (open-vocabulary node labels) and "relation"
(predicate phrases). Real deployments point both at an HTTP embedding
service; tests and fixture runs use the deterministic character-trigram
backend, which needs no models and still ranks lexically related strings
above unrelated ones.
"""
from __future__ import annotations

import hashlib
from typing import Protocol

import numpy as np
import requests

from .errors import BackendUnreachable

SPACES = ("label", "relation")


class EmbeddingBackend(Protocol):
    space: str
    dimension: int

    def embed(self, text: str) -> np.ndarray: ...


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity; inputs are unit vectors so this is a dot product."""
    return float(np.dot(a, b))


def _trigram_bin(gram: str, bins: int) -> int:
    digest = hashlib.sha1(gram.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big") % bins


class HashEmbeddingBackend:
    """Character-trigram hashing embedding: deterministic and language-free.

    Strings sharing character trigrams land in shared bins, so lexically
    overlapping labels score higher than unrelated ones.
    """

    def __init__(self, space: str = "label", dimension: int = 256):
        if space not in SPACES:
            raise ValueError(f"unknown space {space!r}")
        self.space = space
        self.dimension = dimension

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise ValueError("cannot embed empty text")
        padded = f" {text.strip().lower()} "
        vec = np.zeros(self.dimension, dtype=np.float64)
        if len(padded) < 3:
            vec[_trigram_bin(padded, self.dimension)] += 1.0
        else:
            for i in range(len(padded) - 2):
                vec[_trigram_bin(padded[i:i + 3], self.dimension)] += 1.0
        return vec / np.linalg.norm(vec)


class HttpEmbeddingBackend:
    """POST /embed {"text", "space"} -> {"vector": [...]}; output re-normalized."""

    def __init__(self, base_url: str, space: str = "label", dimension: int = 512,
                 timeout: float = 30.0, session: requests.Session | None = None):
        if space not in SPACES:
            raise ValueError(f"unknown space {space!r}")
        self.base_url = base_url.rstrip("/")
        self.space = space
        self.dimension = dimension
        self.timeout = timeout
        self.session = session or requests.Session()
        self._cache: dict[str, np.ndarray] = {}

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise ValueError("cannot embed empty text")
        if text in self._cache:
            return self._cache[text]
        try:
            resp = self.session.post(
                f"{self.base_url}/embed",
                json={"text": text, "space": self.space},
                timeout=self.timeout,
            )
            resp.raise_for_status()
        except requests.RequestException as exc:
            raise BackendUnreachable(f"embedding service {self.base_url}: {exc}") from exc
        vec = np.asarray(resp.json()["vector"], dtype=np.float64)
        vec = vec / np.linalg.norm(vec)
        self._cache[text] = vec
        return vec


def make_embedding_backend(cfg: dict, space: str) -> EmbeddingBackend:
    """Build a backend from a config block {"kind": "hash"|"http", ...}."""
    kind = cfg.get("kind", "hash")
    if kind == "hash":
        return HashEmbeddingBackend(space=space, dimension=int(cfg.get("dimension", 256)))
    if kind == "http":
        return HttpEmbeddingBackend(
            base_url=cfg["base_url"],
            space=space,
            dimension=int(cfg.get("dimension", 512)),
            timeout=float(cfg.get("timeout", 30.0)),
        )
    raise ValueError(f"unknown embedding backend kind {kind!r}")
