import inspect
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from src.embed.chunking import ChunkPlan, plan_chunks
from src.embed.providers import EmbeddingProvider, EmbeddingProviderError
from src.models.checkpoint import read_container, write_container
from src.vocab.char_vocab import PAD_ID

POOLING_MODES = ("mask", "literal")


@dataclass
class DocumentEmbedding:
    vector: np.ndarray
    provider_id: str
    plan: Dict = field(default_factory=dict)


def chunk_inputs(tokens: np.ndarray, plan: ChunkPlan) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Materialise every chunk as (ids, mask), right-padded to the context size."""
    out = []
    for start, end in plan.bounds():
        ids = np.full(plan.context, PAD_ID, dtype=np.int64)
        mask = np.zeros(plan.context, dtype=np.int64)
        ids[: end - start] = tokens[start:end]
        mask[: end - start] = 1
        out.append((ids, mask))
    return out


def _embed_one(provider: EmbeddingProvider, ids: np.ndarray, mask: np.ndarray, index: int) -> np.ndarray:
    try:
        if "chunk_index" in inspect.signature(provider.embed_chunk).parameters:
            emb = provider.embed_chunk(ids.tolist(), mask.tolist(), chunk_index=index)
        else:
            emb = provider.embed_chunk(ids.tolist(), mask.tolist())
    except EmbeddingProviderError as exc:
        if exc.chunk_index is None:
            raise EmbeddingProviderError(str(exc), index) from exc
        raise
    except Exception as exc:
        raise EmbeddingProviderError(str(exc), index) from exc
    emb = np.asarray(emb, dtype=np.float64)
    if emb.shape[0] != len(ids):
        raise EmbeddingProviderError(f"provider returned {emb.shape[0]} rows for {len(ids)} tokens", index)
    return emb


def pool_chunk(emb: np.ndarray, mask: np.ndarray, pooling: str = "mask") -> np.ndarray:
    """Mean over real (mask = 1) tokens, or over all context positions in literal mode."""
    if pooling == "literal":
        return emb.sum(axis=0) / len(mask)
    m = mask.astype(np.float64)[:, None]
    return (emb * m).sum(axis=0) / max(m.sum(), 1.0)


def embed_document(
    tokens: Sequence[int],
    provider: EmbeddingProvider,
    context: int,
    overlap_w: Optional[int] = None,
    pooling: str = "mask",
) -> DocumentEmbedding:
    """
    Fixed-size embedding of an arbitrarily long token sequence.

    Every chunk of the plan is embedded by the provider and mean-pooled;
    E_g is the unweighted mean of the chunk vectors, reduced in chunk order.
    In "mask" mode pad positions are ignored; "literal" divides every chunk
    sum by the full context size.
    """
    if pooling not in POOLING_MODES:
        raise ValueError(f"pooling must be one of {POOLING_MODES}, got {pooling!r}")
    if provider.context_capacity < context:
        raise ValueError(f"Provider context capacity {provider.context_capacity} < requested context {context}")

    tokens = np.asarray(tokens, dtype=np.int64)
    plan = plan_chunks(len(tokens), context, overlap_w)
    chunks = chunk_inputs(tokens, plan)

    n_jobs = max(1, int(getattr(provider, "max_in_flight", 1)))
    embeddings = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_embed_one)(provider, ids, mask, k) for k, (ids, mask) in enumerate(chunks)
    )

    chunk_vectors = [pool_chunk(emb, mask, pooling) for emb, (_, mask) in zip(embeddings, chunks)]
    vector = np.zeros_like(chunk_vectors[0])
    for v in chunk_vectors:
        vector = vector + v
    vector = vector / len(chunk_vectors)
    if not np.all(np.isfinite(vector)):
        raise EmbeddingProviderError("document embedding has non-finite values")
    return DocumentEmbedding(vector=vector, provider_id=provider.provider_id, plan=plan.summary())


def write_embedding_store(path: Path, embeddings: Dict[str, DocumentEmbedding]) -> Path:
    """Header (d_TE, provider id, record ids) + one float32 row per record, in id order."""
    if not embeddings:
        raise ValueError("Nothing to store.")
    ids = sorted(embeddings)
    dims = {embeddings[i].vector.shape[0] for i in ids}
    providers = {embeddings[i].provider_id for i in ids}
    if len(dims) != 1 or len(providers) != 1:
        raise ValueError("All stored embeddings must share one dimension and provider")
    matrix = np.stack([embeddings[i].vector for i in ids])
    return write_container(
        path,
        {"kind": "doc_embeddings", "config": {"d_te": dims.pop(), "provider_id": providers.pop(), "ids": ids}},
        {"embeddings": matrix},
    )


def read_embedding_store(path: Path) -> Tuple[List[str], np.ndarray, str]:
    header, tensors = read_container(path)
    if header.get("kind") != "doc_embeddings":
        raise ValueError(f"{path} is not a document-embedding store")
    cfg = header["config"]
    matrix = tensors["embeddings"]
    if matrix.shape != (len(cfg["ids"]), cfg["d_te"]):
        raise ValueError(f"{path}: store matrix {matrix.shape} does not match its header")
    return cfg["ids"], matrix, cfg["provider_id"]
