"""Text encoders behind one interface: a remote embedding-API client and a
deterministic offline mock. All output vectors are L2-normalized."""

from __future__ import annotations

import hashlib
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import httpx
import numpy as np


class EncoderError(Exception):
    """Raised when encoding fails (remote errors after retries, bad shapes)."""


@dataclass(frozen=True)
class EncoderSpec:
    """Identity and limits of one encoder in the ensemble.

    ``endpoint`` is an HTTP embedding API; ``None`` selects the offline mock.
    Inputs longer than ``max_input_chars`` are truncated before encoding.
    """

    name: str
    dimension: int
    max_input_chars: int = 8192
    endpoint: str | None = None
    api_key_env: str | None = None
    batch_size: int = 64
    max_concurrency: int = 4

    def __post_init__(self) -> None:
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if self.max_input_chars < 1:
            raise ValueError("max_input_chars must be >= 1")


def l2_normalize(v) -> np.ndarray:
    """Scale a vector to unit L2 norm. An all-zero vector has no direction
    and is rejected."""
    arr = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(arr))
    if norm == 0.0:
        raise EncoderError("cannot normalize an all-zero vector")
    return arr / norm


_TOKEN_RE = re.compile(r"\w+", re.UNICODE)


class MockEncoder:
    """Deterministic offline encoder.

    Every token maps to a pseudo-random unit-variance vector seeded by a hash
    of (encoder name, token); a text embeds as the normalized mean of its
    token vectors. Same (name, text) always yields the same vector, different
    encoder names yield different geometries, and texts sharing vocabulary
    land close together, which is what end-to-end tests need.
    """

    def __init__(self, spec: EncoderSpec):
        self.spec = spec
        self._token_cache: dict[str, np.ndarray] = {}

    def _token_vector(self, token: str) -> np.ndarray:
        vec = self._token_cache.get(token)
        if vec is None:
            digest = hashlib.blake2b(
                f"{self.spec.name}\x00{token}".encode("utf-8"), digest_size=8
            ).digest()
            seed = int.from_bytes(digest, "big")
            vec = np.random.default_rng(seed).standard_normal(self.spec.dimension)
            self._token_cache[token] = vec
        return vec

    def encode(self, texts: list[str]) -> np.ndarray:
        if not texts:
            raise EncoderError("encode requires at least one text")
        rows = np.empty((len(texts), self.spec.dimension), dtype=np.float64)
        for i, text in enumerate(texts):
            if not text:
                raise EncoderError(f"text at position {i} is empty")
            truncated = text[: self.spec.max_input_chars]
            tokens = _TOKEN_RE.findall(truncated.lower())
            if not tokens:
                tokens = [f"\x00{truncated}"]
            acc = np.zeros(self.spec.dimension, dtype=np.float64)
            for token in tokens:
                acc += self._token_vector(token)
            rows[i] = l2_normalize(acc)
        return rows


class RemoteEncoder:
    """Client for a JSON embedding endpoint.

    Request: ``{"input": [texts], "model": name}``; response:
    ``{"data": [{"embedding": [...]}, ...]}``. Transport errors and 5xx
    responses are retried with exponential backoff; 4xx fail immediately.
    Batches are dispatched with bounded concurrency and reassembled in order.
    """

    def __init__(
        self,
        spec: EncoderSpec,
        client: httpx.Client | None = None,
        max_attempts: int = 3,
        backoff_start: float = 0.5,
        sleep=time.sleep,
    ):
        if spec.endpoint is None:
            raise ValueError("RemoteEncoder requires an endpoint")
        self.spec = spec
        self._client = client or httpx.Client(timeout=60.0)
        self._max_attempts = max_attempts
        self._backoff_start = backoff_start
        self._sleep = sleep

    def _headers(self) -> dict[str, str]:
        import os

        headers = {"Content-Type": "application/json"}
        if self.spec.api_key_env:
            key = os.environ.get(self.spec.api_key_env, "")
            if key:
                headers["Authorization"] = f"Bearer {key}"
        return headers

    def _post_batch(self, batch: list[str]) -> np.ndarray:
        payload = {"input": batch, "model": self.spec.name}
        delay = self._backoff_start
        last_error: Exception | None = None
        for attempt in range(self._max_attempts):
            try:
                response = self._client.post(self.spec.endpoint, json=payload, headers=self._headers())
            except httpx.TransportError as exc:
                last_error = exc
            else:
                if response.status_code >= 500:
                    last_error = EncoderError(f"server error {response.status_code}")
                elif response.status_code >= 400:
                    raise EncoderError(
                        f"encoder {self.spec.name!r}: request rejected ({response.status_code}): "
                        f"{response.text[:200]}"
                    )
                else:
                    data = response.json().get("data", [])
                    if len(data) != len(batch):
                        raise EncoderError(
                            f"encoder {self.spec.name!r}: expected {len(batch)} embeddings, got {len(data)}"
                        )
                    rows = np.asarray([item["embedding"] for item in data], dtype=np.float64)
                    if rows.shape != (len(batch), self.spec.dimension):
                        raise EncoderError(
                            f"encoder {self.spec.name!r}: dimension mismatch, got shape {rows.shape}"
                        )
                    return np.vstack([l2_normalize(row) for row in rows])
            if attempt < self._max_attempts - 1:
                self._sleep(delay)
                delay *= 2
        raise EncoderError(
            f"encoder {self.spec.name!r}: failed after {self._max_attempts} attempts: {last_error}"
        )

    def encode(self, texts: list[str]) -> np.ndarray:
        if not texts:
            raise EncoderError("encode requires at least one text")
        for i, text in enumerate(texts):
            if not text:
                raise EncoderError(f"text at position {i} is empty")
        truncated = [t[: self.spec.max_input_chars] for t in texts]
        batches = [
            truncated[i : i + self.spec.batch_size]
            for i in range(0, len(truncated), self.spec.batch_size)
        ]
        if len(batches) == 1:
            return self._post_batch(batches[0])
        workers = max(1, min(self.spec.max_concurrency, len(batches)))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(self._post_batch, batches))
        return np.vstack(results)


def build_encoder(spec: EncoderSpec, client: httpx.Client | None = None):
    """Mock encoder when no endpoint is configured, remote client otherwise."""
    if spec.endpoint is None:
        return MockEncoder(spec)
    return RemoteEncoder(spec, client=client)
