import numpy as np
import pytest
import requests
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.testclient import TestClient

from src.embed.doc_embed import embed_document
from src.embed.providers import EmbeddingProviderError, http_provider, mock_provider

DIM = 4


def _stub(fail_first: int = 0, rows_delta: int = 0, fail_status: int = 500):
    """Embeddings service backed by the mock provider; fails the first calls with fail_status."""
    app = FastAPI()
    mock = mock_provider(DIM, seed=7)
    state = {"calls": 0, "auth": []}

    @app.post("/embed")
    async def embed(request: Request):
        state["calls"] += 1
        state["auth"].append(request.headers.get("authorization"))
        if state["calls"] <= fail_first:
            return JSONResponse({"detail": "failed"}, status_code=fail_status)
        payload = await request.json()
        rows = mock.embed_chunk(payload["tokens"], payload["mask"]).tolist()
        if rows_delta:
            rows = rows[:rows_delta]
        return {"embeddings": rows}

    return TestClient(app), state, mock


def _provider(client, tmp_path, **kwargs):
    return http_provider(
        "http://testserver/embed",
        auth_token="secret",
        cache_dir=tmp_path / "cache",
        backoff_seconds=0.0,
        max_in_flight=1,
        session=client,
        **kwargs,
    )


def test_http_provider_matches_mock(tmp_path):
    client, state, mock = _stub()
    provider = _provider(client, tmp_path)
    tokens = np.arange(2, 30)
    got = embed_document(tokens, provider, context=8, overlap_w=2)
    want = embed_document(tokens, mock, context=8, overlap_w=2)
    assert np.allclose(got.vector, want.vector)
    assert got.provider_id == "http:http://testserver/embed"
    assert state["auth"][0] == "Bearer secret"


def test_server_error_is_retried(tmp_path):
    client, state, mock = _stub(fail_first=1)
    provider = _provider(client, tmp_path)
    emb = provider.embed_chunk([2, 3, 4], [1, 1, 1])
    assert np.allclose(emb, mock.embed_chunk([2, 3, 4], [1, 1, 1]))
    assert provider.network_calls == 2


def test_gives_up_after_max_retries(tmp_path):
    client, _, _ = _stub(fail_first=10)
    provider = _provider(client, tmp_path, max_retries=3)
    with pytest.raises(EmbeddingProviderError) as info:
        provider.embed_chunk([2, 3], [1, 1], chunk_index=4)
    assert info.value.chunk_index == 4
    assert provider.network_calls == 3


def test_cache_hit_skips_the_network(tmp_path):
    client, state, _ = _stub()
    first = _provider(client, tmp_path)
    a = first.embed_chunk([5, 6, 7], [1, 1, 0])

    second = _provider(client, tmp_path)
    b = second.embed_chunk([5, 6, 7], [1, 1, 0])
    assert second.network_calls == 0
    assert state["calls"] == 1
    assert np.array_equal(a, b)


def test_shape_mismatch_is_rejected(tmp_path):
    client, _, _ = _stub(rows_delta=-1)
    provider = _provider(client, tmp_path)
    with pytest.raises(EmbeddingProviderError, match="shape"):
        provider.embed_chunk([2, 3, 4], [1, 1, 1])


def test_declared_dimension_is_enforced(tmp_path):
    client, _, _ = _stub()
    provider = _provider(client, tmp_path, dim=DIM + 1)
    with pytest.raises(EmbeddingProviderError):
        provider.embed_chunk([2, 3], [1, 1])


@pytest.mark.parametrize("status", [400, 401, 422])
def test_client_error_fails_without_retry(tmp_path, status):
    client, state, _ = _stub(fail_first=10, fail_status=status)
    provider = _provider(client, tmp_path, max_retries=3)
    with pytest.raises(EmbeddingProviderError, match="rejected") as info:
        provider.embed_chunk([2, 3], [1, 1], chunk_index=1)
    assert info.value.chunk_index == 1
    assert provider.network_calls == 1
    assert state["calls"] == 1


def test_rate_limit_is_retried(tmp_path):
    client, _, _ = _stub(fail_first=1, fail_status=429)
    provider = _provider(client, tmp_path)
    provider.embed_chunk([2, 3], [1, 1])
    assert provider.network_calls == 2


class _DroppingSession:
    """Raises a connection error on the first post, then delegates."""

    def __init__(self, client):
        self.client = client
        self.failed = False

    def post(self, url, **kwargs):
        if not self.failed:
            self.failed = True
            raise requests.ConnectionError("connection reset")
        return self.client.post(url, **kwargs)


def test_connection_error_is_retried(tmp_path):
    client, state, _ = _stub()
    provider = _provider(_DroppingSession(client), tmp_path)
    provider.embed_chunk([2, 3], [1, 1])
    assert provider.network_calls == 2
    assert state["calls"] == 1


def test_corrupt_cache_entry_is_refetched(tmp_path):
    client, state, mock = _stub()
    provider = _provider(client, tmp_path)
    tokens, mask = [5, 6, 7], [1, 1, 1]
    cache_path = provider._cache_path({"tokens": tokens, "mask": mask})
    cache_path.parent.mkdir(parents=True)
    cache_path.write_text('{"embeddings": [[0.1, 0.2', encoding="utf-8")

    emb = provider.embed_chunk(tokens, mask)

    assert np.allclose(emb, mock.embed_chunk(tokens, mask))
    assert state["calls"] == 1
    assert np.allclose(provider._parse(cache_path.read_text(encoding="utf-8"), 3, None), emb)
    assert list(cache_path.parent.glob(".tmp-*")) == []
