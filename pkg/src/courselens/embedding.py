"""Text embedding backends.

Two backends behind one interface: an HTTP client for a local model runner
(Ollama-style ``POST /api/embeddings``), and a deterministic mock for tests
and offline runs. Both sit behind a content-addressed LRU cache keyed by
the hash of the normalized text, so repeated FAQ/keyword texts never hit
the wire twice.
"""

from __future__ import annotations

import hashlib
import threading
from collections import OrderedDict
from dataclasses import dataclass

import httpx
import numpy as np

from courselens.models import normalize_keyword_text
from courselens.vectors import as_vector


class EmbeddingBackendError(RuntimeError):
    """Backend unreachable, misbehaving, or returning the wrong dimension."""


@dataclass
class EmbedderConfig:
    backend: str = "mock"  # "wire" | "mock"
    endpoint_url: str = "http://localhost:11434"
    model_name: str = "all-minilm"
    dimension: int = 384
    timeout: float = 30.0
    cache_capacity: int = 4096
    max_inflight: int = 4
    mock_seed: int = 0


def _cache_key(text: str) -> str:
    normalized = " ".join(text.strip().split()).lower()
    return hashlib.sha256(normalized.encode("utf-8")).hexdigest()


class _BaseEmbedder:
    """Cache + validation shared by both backends."""

    def __init__(self, config: EmbedderConfig):
        self.config = config
        self._cache: OrderedDict[str, np.ndarray] = OrderedDict()
        self._cache_lock = threading.Lock()

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise ValueError("cannot embed empty text")
        key = _cache_key(text)
        with self._cache_lock:
            if key in self._cache:
                self._cache.move_to_end(key)
                return self._cache[key]
        vec = self._embed_uncached(text)
        if vec.shape[0] != self.config.dimension:
            raise EmbeddingBackendError(
                f"backend returned dimension {vec.shape[0]}, "
                f"configured {self.config.dimension}"
            )
        vec.setflags(write=False)
        with self._cache_lock:
            self._cache[key] = vec
            self._cache.move_to_end(key)
            while len(self._cache) > self.config.cache_capacity:
                self._cache.popitem(last=False)
        return vec

    def embed_batch(self, texts: list[str]) -> list[np.ndarray]:
        out = []
        for i, t in enumerate(texts):
            try:
                out.append(self.embed(t))
            except Exception as exc:
                raise EmbeddingBackendError(f"embedding failed at index {i}: {exc}") from exc
        return out

    def _embed_uncached(self, text: str) -> np.ndarray:
        raise NotImplementedError


class MockEmbedder(_BaseEmbedder):
    """Deterministic hash-based embedder for model-free testing.

    Each distinct token (after keyword normalization) maps to a fixed
    pseudo-random unit vector seeded from the token's digest; the text
    vector is the unit-normalized sum. Same seed + same text gives the
    same vector in any process.
    """

    def _token_vector(self, token: str) -> np.ndarray:
        digest = hashlib.blake2b(
            f"{self.config.mock_seed}:{token}".encode("utf-8"), digest_size=8
        ).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "big"))
        v = rng.standard_normal(self.config.dimension)
        return v / np.linalg.norm(v)

    def _embed_uncached(self, text: str) -> np.ndarray:
        tokens = normalize_keyword_text(text).split()
        total = np.zeros(self.config.dimension)
        for tok in tokens:
            total += self._token_vector(tok)
        n = np.linalg.norm(total)
        if n == 0.0:
            # token vectors cancelling is measure-zero; guard anyway
            raise EmbeddingBackendError(f"degenerate mock embedding for {text!r}")
        return total / n


class HttpEmbedder(_BaseEmbedder):
    """Client for a local runner's single-text embeddings endpoint."""

    def __init__(self, config: EmbedderConfig, client: httpx.Client | None = None):
        super().__init__(config)
        self._client = client or httpx.Client(timeout=config.timeout)
        self._inflight = threading.Semaphore(config.max_inflight)

    def _embed_uncached(self, text: str) -> np.ndarray:
        url = self.config.endpoint_url.rstrip("/") + "/api/embeddings"
        body = {"model": self.config.model_name, "prompt": text}
        with self._inflight:
            try:
                resp = self._client.post(url, json=body)
            except httpx.HTTPError as exc:
                raise EmbeddingBackendError(f"embedding backend unreachable: {exc}") from exc
        if resp.status_code // 100 != 2:
            raise EmbeddingBackendError(
                f"embedding backend returned HTTP {resp.status_code}"
            )
        try:
            values = resp.json()["embedding"]
        except (KeyError, ValueError) as exc:
            raise EmbeddingBackendError(f"malformed embedding response: {exc}") from exc
        return as_vector(values)


def make_embedder(config: EmbedderConfig) -> _BaseEmbedder:
    if config.backend == "mock":
        return MockEmbedder(config)
    if config.backend == "wire":
        return HttpEmbedder(config)
    raise ValueError(f"unknown embedding backend {config.backend!r}")
