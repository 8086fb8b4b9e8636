"""Text encoders producing fixed-dimension unit-norm embedding vectors.

Two interchangeable backends satisfy one contract:

* :class:`HashEncoder` — deterministic offline reference backend. Each token
  is hashed (FNV-1a 64) to seed a splitmix64 stream that yields a pseudo-random
  unit vector; token vectors are mean-pooled and the pooled vector normalized.
  Same text, same vector — on any platform, in any process.
* :class:`RemoteEncoder` — client for an embedding service speaking the
  ``POST {model, input: [texts]} -> {data: [{index, embedding}]}`` protocol,
  with bounded retries and concurrency.

Vectors are float64 numpy arrays with Euclidean norm 1 within 1e-6.
"""

from __future__ import annotations

import logging
import re
import threading
import time
import unicodedata
from collections import OrderedDict
from typing import Iterable, Protocol

import numpy as np

from .errors import (
    BackendUnavailable,
    DimensionMismatch,
    EmptyText,
    InvalidParams,
    ZeroVector,
)

logger = logging.getLogger(__name__)

DEFAULT_DIM = 768
MIN_DIM = 8
MAX_DIM = 4096

# Unicode alphanumeric runs (word chars minus underscore).
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

# FNV-1a 64-bit constants.
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF

# splitmix64 constants.
_SM_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_SM_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_SM_MIX2 = np.uint64(0x94D049BB133111EB)


def tokenize(text: str) -> list[str]:
    """Split text into lowercased word tokens on non-alphanumeric boundaries.

    Raises :class:`EmptyText` when no alphanumeric token survives.
    """
    tokens = _TOKEN_RE.findall(unicodedata.normalize("NFC", text).lower())
    if not tokens:
        raise EmptyText("text contains no alphanumeric tokens")
    return tokens


def fnv1a64(data: bytes) -> int:
    """FNV-1a 64-bit hash — stable across platforms and processes."""
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _U64
    return h


def _splitmix64_uniform(seed: int, count: int) -> np.ndarray:
    """``count`` deterministic uniforms in [-1, 1) from a splitmix64 stream."""
    idx = np.arange(1, count + 1, dtype=np.uint64)
    z = np.uint64(seed & _U64) + _SM_GAMMA * idx
    z = (z ^ (z >> np.uint64(30))) * _SM_MIX1
    z = (z ^ (z >> np.uint64(27))) * _SM_MIX2
    z = z ^ (z >> np.uint64(31))
    unit = (z >> np.uint64(11)).astype(np.float64) * (2.0**-53)  # [0, 1)
    return 2.0 * unit - 1.0


def normalize(vector: np.ndarray | Iterable[float]) -> np.ndarray:
    """Scale a vector to unit Euclidean norm.

    Raises :class:`ZeroVector` for all-zero input and
    :class:`InvalidParams` for non-finite values.
    """
    v = np.asarray(vector, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise InvalidParams("vector has non-finite values")
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise ZeroVector("cannot normalize the zero vector")
    return v / norm


def _check_dim(dim: int) -> int:
    if not (MIN_DIM <= dim <= MAX_DIM):
        raise InvalidParams(f"dim must be in [{MIN_DIM}, {MAX_DIM}], got {dim}")
    return dim


class EncoderBackend(Protocol):
    """Contract every encoder backend satisfies."""

    name: str
    dim: int

    def encode(self, text: str) -> np.ndarray: ...

    def encode_batch(self, texts: list[str]) -> list[np.ndarray]: ...


class HashEncoder:
    """Deterministic reference encoder: hashed random projection per token.

    Token vector: FNV-1a 64 of the UTF-8 token seeds a splitmix64 stream;
    ``dim`` draws in [-1, 1) are normalized to a unit vector. Text vector:
    mean of token vectors, normalized. Mean pooling makes the output
    order-invariant over tokens; this is the intended trade for full
    offline determinism.
    """

    def __init__(self, dim: int = DEFAULT_DIM, cache_size: int = 8192):
        self.name = "hash"
        self.dim = _check_dim(dim)
        self._cache: OrderedDict[str, np.ndarray] = OrderedDict()
        self._cache_size = cache_size
        self._lock = threading.Lock()

    def _token_vector(self, token: str) -> np.ndarray:
        with self._lock:
            cached = self._cache.get(token)
            if cached is not None:
                self._cache.move_to_end(token)
                return cached
        raw = _splitmix64_uniform(fnv1a64(token.encode("utf-8")), self.dim)
        vec = normalize(raw)
        vec.setflags(write=False)
        with self._lock:
            self._cache[token] = vec
            if len(self._cache) > self._cache_size:
                self._cache.popitem(last=False)
        return vec

    def encode(self, text: str) -> np.ndarray:
        tokens = tokenize(text)
        pooled = np.zeros(self.dim, dtype=np.float64)
        for token in tokens:
            pooled += self._token_vector(token)
        pooled /= len(tokens)
        return normalize(pooled)

    def encode_batch(self, texts: list[str]) -> list[np.ndarray]:
        # Validate all inputs first so a bad element aborts with no output.
        for text in texts:
            tokenize(text)
        return [self.encode(text) for text in texts]


class RemoteEncoder:
    """Client for a remote embedding service.

    Protocol: ``POST <endpoint>`` with body ``{"model": ..., "input": [texts]}``;
    response ``{"data": [{"index": i, "embedding": [floats]}]}``. Transport and
    5xx failures are retried with exponential backoff; exhaustion raises
    :class:`BackendUnavailable`. Returned vectors are normalized locally and
    must match the configured dimension. In-flight requests are bounded by a
    semaphore so bursts cannot overwhelm the service.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        dim: int = DEFAULT_DIM,
        auth_token: str | None = None,
        timeout: float = 30.0,
        max_retries: int = 3,
        backoff: float = 0.25,
        max_in_flight: int = 4,
        batch_size: int = 64,
        transport=None,
    ):
        import httpx

        self.name = "remote"
        self.dim = _check_dim(dim)
        self.endpoint = endpoint
        self.model = model
        self._max_retries = max_retries
        self._backoff = backoff
        self._batch_size = batch_size
        self._sema = threading.Semaphore(max_in_flight)
        headers = {}
        if auth_token:
            headers["Authorization"] = f"Bearer {auth_token}"
        self._client = httpx.Client(
            timeout=timeout, headers=headers, transport=transport
        )

    def close(self) -> None:
        self._client.close()

    def _post_chunk(self, texts: list[str]) -> list[np.ndarray]:
        import httpx

        payload = {"model": self.model, "input": texts}
        last_error: Exception | None = None
        for attempt in range(self._max_retries + 1):
            if attempt:
                time.sleep(self._backoff * (2 ** (attempt - 1)))
            try:
                with self._sema:
                    response = self._client.post(self.endpoint, json=payload)
            except httpx.HTTPError as exc:
                last_error = exc
                logger.warning("embedding request failed (attempt %d): %s", attempt + 1, exc)
                continue
            if response.status_code >= 500:
                last_error = BackendUnavailable(
                    f"embedding service returned {response.status_code}"
                )
                continue
            if response.status_code != 200:
                raise BackendUnavailable(
                    f"embedding service rejected request: {response.status_code} "
                    f"{response.text[:200]}"
                )
            return self._parse_response(response.json(), len(texts))
        raise BackendUnavailable(f"embedding service unreachable: {last_error}")

    def _parse_response(self, body: dict, expected: int) -> list[np.ndarray]:
        try:
            items = body["data"]
        except (TypeError, KeyError) as exc:
            raise BackendUnavailable("malformed embedding response: no data field") from exc
        if len(items) != expected:
            raise BackendUnavailable(
                f"embedding response has {len(items)} items, expected {expected}"
            )
        vectors: list[np.ndarray] = [None] * expected  # type: ignore[list-item]
        for item in items:
            raw = np.asarray(item["embedding"], dtype=np.float64)
            if raw.shape != (self.dim,):
                raise DimensionMismatch(
                    f"service returned dim {raw.shape[0] if raw.ndim == 1 else raw.shape},"
                    f" expected {self.dim}"
                )
            vectors[int(item["index"])] = normalize(raw)
        return vectors

    def encode(self, text: str) -> np.ndarray:
        tokenize(text)  # empty-input guard shared with the reference backend
        return self._post_chunk([text])[0]

    def encode_batch(self, texts: list[str]) -> list[np.ndarray]:
        for text in texts:
            tokenize(text)
        out: list[np.ndarray] = []
        for start in range(0, len(texts), self._batch_size):
            out.extend(self._post_chunk(texts[start : start + self._batch_size]))
        return out
