import hashlib
import json
import os
import tempfile
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Protocol, Sequence, runtime_checkable

import numpy as np
import requests

from src.config.settings import get_cache_dir
from src.run_log import log_event

# client errors that can still succeed on a later attempt
RETRYABLE_4XX = frozenset({408, 429})


def _status_code(exc: Exception) -> Optional[int]:
    response = getattr(exc, "response", None)
    status = getattr(response, "status_code", None)
    return int(status) if status is not None else None


def _is_retryable(exc: Exception) -> bool:
    """5xx, 408/429 and transport failures (no HTTP status at all) are retried."""
    status = _status_code(exc)
    return status is None or status >= 500 or status in RETRYABLE_4XX


class EmbeddingProviderError(RuntimeError):
    """Raised when a provider cannot embed a chunk; carries the chunk index when known."""

    def __init__(self, message: str, chunk_index: Optional[int] = None) -> None:
        super().__init__(message if chunk_index is None else f"chunk {chunk_index}: {message}")
        self.chunk_index = chunk_index


@runtime_checkable
class EmbeddingProvider(Protocol):
    """Anything that turns one chunk of token ids into per-token embeddings (chunk_len, dim)."""

    provider_id: str
    context_capacity: int
    dim: int
    max_in_flight: int

    def embed_chunk(self, tokens: Sequence[int], mask: Sequence[int]) -> np.ndarray:
        ...


class MockProvider:
    """
    Deterministic stand-in for an LLM back-end.

    Each token id maps to a fixed vector in [-1, 1]^dim drawn from a generator
    seeded by (seed, token id), so identical tokens always embed identically,
    independent of position.
    """

    def __init__(self, dim: int, seed: int = 0, context_capacity: int = 1 << 20) -> None:
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        self.dim = dim
        self.seed = seed
        self.context_capacity = context_capacity
        self.max_in_flight = 1
        self.provider_id = f"mock-d{dim}-s{seed}"
        self._rows: Dict[int, np.ndarray] = {}

    def token_vector(self, token: int) -> np.ndarray:
        token = int(token)
        row = self._rows.get(token)
        if row is None:
            rng = np.random.default_rng(np.random.SeedSequence([self.seed, token]))
            row = rng.uniform(-1.0, 1.0, size=self.dim)
            self._rows[token] = row
        return row

    def embed_chunk(self, tokens: Sequence[int], mask: Sequence[int]) -> np.ndarray:
        if len(tokens) != len(mask):
            raise EmbeddingProviderError(f"{len(tokens)} tokens but {len(mask)} mask entries")
        if not len(tokens):
            return np.zeros((0, self.dim))
        return np.stack([self.token_vector(t) for t in tokens])


def mock_provider(dim: int, seed: int = 0) -> MockProvider:
    return MockProvider(dim=dim, seed=seed)


class HttpEmbeddingProvider:
    """
    Client for an external embeddings service.

    POSTs {"tokens": [...], "mask": [...]} as JSON and expects
    {"embeddings": [[float] * dim] * len(tokens)}. Server errors, timeouts and
    connection failures are retried with exponential backoff; other 4xx
    answers fail at once. Successful responses are cached on disk, one file
    per request hash, so repeated chunks never hit the network.
    """

    def __init__(
        self,
        endpoint_url: str,
        auth_token: Optional[str] = None,
        timeout: float = 30.0,
        dim: Optional[int] = None,
        context_capacity: int = 4096,
        cache_dir: Optional[Path] = None,
        max_retries: int = 3,
        backoff_seconds: float = 1.0,
        max_in_flight: int = 4,
        session: Any = None,
    ) -> None:
        self.endpoint_url = endpoint_url
        self.auth_token = auth_token
        self.timeout = timeout
        self.dim = dim
        self.context_capacity = context_capacity
        self.cache_dir = Path(cache_dir) if cache_dir is not None else Path(get_cache_dir())
        self.max_retries = max_retries
        self.backoff_seconds = backoff_seconds
        self.max_in_flight = max(1, int(max_in_flight))
        # anything with a requests-style .post(url, json=, headers=, timeout=)
        self.session = session if session is not None else requests.Session()
        self.provider_id = f"http:{endpoint_url}"
        self.network_calls = 0

    def _headers(self) -> Dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.auth_token:
            headers["Authorization"] = f"Bearer {self.auth_token}"
        return headers

    def _cache_path(self, payload: Dict[str, List[int]]) -> Path:
        key = json.dumps({"endpoint": self.endpoint_url, **payload}, sort_keys=True, separators=(",", ":"))
        return self.cache_dir / f"{hashlib.sha256(key.encode('utf-8')).hexdigest()}.json"

    def _post(self, payload: Dict[str, List[int]], chunk_index: Optional[int]) -> str:
        last_exc: Exception = RuntimeError("No attempts made")
        for attempt in range(1, self.max_retries + 1):
            try:
                self.network_calls += 1
                response = self.session.post(
                    self.endpoint_url, json=payload, headers=self._headers(), timeout=self.timeout
                )
                response.raise_for_status()
                return response.text
            except Exception as exc:
                last_exc = exc
                if not _is_retryable(exc):
                    raise EmbeddingProviderError(f"request rejected: {exc}", chunk_index) from exc
                if attempt < self.max_retries:
                    wait = self.backoff_seconds * 2 ** (attempt - 1)
                    log_event(
                        f"  Embedding request attempt {attempt}/{self.max_retries} failed: {exc}. "
                        f"Retrying in {wait:.1f}s...",
                        echo=False,
                    )
                    time.sleep(wait)
        raise EmbeddingProviderError(f"request failed after {self.max_retries} attempts: {last_exc}", chunk_index) from last_exc

    def _parse(self, body: str, n_tokens: int, chunk_index: Optional[int]) -> np.ndarray:
        try:
            data = json.loads(body)
            emb = np.asarray(data["embeddings"], dtype=np.float64)
        except (ValueError, KeyError, TypeError) as exc:
            raise EmbeddingProviderError(f"malformed response: {exc}", chunk_index) from exc
        if emb.ndim != 2 or emb.shape[0] != n_tokens or (self.dim is not None and emb.shape[1] != self.dim):
            raise EmbeddingProviderError(
                f"response shape {emb.shape} does not match ({n_tokens}, {self.dim or 'd'})", chunk_index
            )
        return emb

    def embed_chunk(self, tokens: Sequence[int], mask: Sequence[int], chunk_index: Optional[int] = None) -> np.ndarray:
        payload = {"tokens": [int(t) for t in tokens], "mask": [int(m) for m in mask]}
        cache_path = self._cache_path(payload)
        if cache_path.exists():
            try:
                return self._parse(cache_path.read_text(encoding="utf-8"), len(tokens), chunk_index)
            except EmbeddingProviderError as exc:
                log_event(f"⚠️ Dropping unreadable cache entry {cache_path.name}: {exc}", echo=False)
                cache_path.unlink(missing_ok=True)

        body = self._post(payload, chunk_index)
        emb = self._parse(body, len(tokens), chunk_index)
        if self.dim is None:
            self.dim = int(emb.shape[1])
        self._write_cache(cache_path, body)
        return emb

    def _write_cache(self, cache_path: Path, body: str) -> None:
        """Write to a temp file in the cache directory, then rename over the entry."""
        cache_path.parent.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(
            "w", encoding="utf-8", dir=cache_path.parent, prefix=".tmp-", suffix=".json", delete=False
        ) as tmp:
            tmp.write(body)
        try:
            os.replace(tmp.name, cache_path)
        except OSError:
            Path(tmp.name).unlink(missing_ok=True)
            raise


def http_provider(endpoint_url: str, auth_token: Optional[str] = None, timeout: float = 30.0, **kwargs) -> HttpEmbeddingProvider:
    return HttpEmbeddingProvider(endpoint_url, auth_token=auth_token, timeout=timeout, **kwargs)
