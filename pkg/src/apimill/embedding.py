"""Text embedding providers and vector similarity.

Two providers share one interface: a deterministic lexical fallback (hashed
character trigrams, no model, no network) and a remote embedding service.
Evaluation and parameter inference both consume this interface.
"""

from __future__ import annotations

import os
import zlib
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import requests

from .errors import DimensionMismatch, EmbeddingUnavailable


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two vectors; 0.0 when either is zero."""
    va = np.asarray(a, dtype=np.float64).ravel()
    vb = np.asarray(b, dtype=np.float64).ravel()
    if va.shape[0] != vb.shape[0]:
        raise DimensionMismatch(got=vb.shape[0], expected=va.shape[0])
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(va, vb) / (na * nb))


class LexicalEmbedding:
    """Hashed character-trigram counts, L2-normalized.

    Deterministic across processes: trigrams are hashed with crc32, never the
    salted builtin hash().  Empty text embeds to the zero vector.
    """

    kind = "lexical"

    def __init__(self, dimension: int = 256):
        if dimension <= 0:
            raise ValueError("dimension must be positive")
        self.dimension = dimension

    def _grams(self, text: str):
        s = text.lower()
        if len(s) < 3:
            return [s] if s else []
        return [s[i : i + 3] for i in range(len(s) - 2)]

    def embed_one(self, text: str) -> np.ndarray:
        v = np.zeros(self.dimension, dtype=np.float64)
        for gram in self._grams(text):
            v[zlib.crc32(gram.encode("utf-8")) % self.dimension] += 1.0
        norm = float(np.linalg.norm(v))
        if norm > 0.0:
            v /= norm
        return v

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        return np.stack([self.embed_one(t) for t in texts]) if texts else np.zeros((0, self.dimension))


@dataclass
class RemoteEmbeddingConfig:
    endpoint_url: str
    model_name: str
    api_key_env: Optional[str] = None
    timeout: float = 60.0
    batch_size: int = 128


class RemoteEmbedding:
    """Embedding served over HTTP: POST {model, input: [texts]} →
    {data: [{embedding: [...]}, ...]}.  Credentials come from the
    environment variable named in the config, never from the config itself.
    """

    kind = "remote"

    def __init__(self, config: RemoteEmbeddingConfig, dimension: Optional[int] = None,
                 rate_limiter=None):
        self.config = config
        self.dimension = dimension  # learned from the first response when unset
        self._rate_limiter = rate_limiter

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.config.api_key_env:
            key = os.environ.get(self.config.api_key_env)
            if key:
                headers["Authorization"] = f"Bearer {key}"
        return headers

    def _post_batch(self, batch: Sequence[str]) -> list:
        if self._rate_limiter is not None:
            self._rate_limiter.acquire_for(self.config.endpoint_url)
        try:
            resp = requests.post(
                self.config.endpoint_url,
                json={"model": self.config.model_name, "input": list(batch)},
                headers=self._headers(),
                timeout=self.config.timeout,
            )
        except requests.RequestException as exc:
            raise EmbeddingUnavailable(f"transport: {exc}") from exc
        if resp.status_code != 200:
            raise EmbeddingUnavailable(f"status {resp.status_code}: {resp.text[:200]}")
        try:
            rows = resp.json()["data"]
            return [row["embedding"] for row in rows]
        except (ValueError, KeyError, TypeError) as exc:
            raise EmbeddingUnavailable(f"malformed response: {exc}") from exc

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        vectors: list = []
        texts = list(texts)
        for start in range(0, len(texts), self.config.batch_size):
            vectors.extend(self._post_batch(texts[start : start + self.config.batch_size]))
        if not vectors:
            return np.zeros((0, self.dimension or 0))
        out = np.asarray(vectors, dtype=np.float64)
        if self.dimension is None:
            self.dimension = out.shape[1]
        elif out.shape[1] != self.dimension:
            raise DimensionMismatch(got=out.shape[1], expected=self.dimension)
        return out

    def embed_one(self, text: str) -> np.ndarray:
        return self.embed([text])[0]
