"""
Versioned binary container for model checkpoints and embedding files.

Layout:
    b"LTRG"               magic
    uint32 LE             format version
    uint32 LE             header length in bytes
    header                UTF-8 JSON: kind, config, vocab, metrics, meta and a
                          tensor index [{name, shape, offset}] (offsets relative
                          to the start of the blob section)
    blobs                 row-major little-endian float32 tensors
"""
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from src.vocab.char_vocab import CharVocab, vocab_from_tokens

MAGIC = b"LTRG"
FORMAT_VERSION = 1
BLOB_DTYPE = np.dtype("<f4")


class CheckpointError(ValueError):
    """Raised for missing, corrupt or mismatched checkpoint files."""


@dataclass
class ModelCheckpoint:
    kind: str
    config: Dict[str, Any]
    params: Dict[str, np.ndarray]
    vocab: Optional[CharVocab] = None
    metrics: Dict[str, Any] = field(default_factory=dict)
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def vocab_hash(self) -> Optional[str]:
        return self.vocab.vocab_hash if self.vocab is not None else None

    def save(self, path: Path) -> Path:
        """
        Write the checkpoint container. Every tensor is stored as little-endian
        float32, so a model trained with precision "float64" loads back with its
        parameters rounded to float32 and does not round-trip bit-exactly.
        """
        return write_container(
            path,
            {
                "kind": self.kind,
                "config": self.config,
                "vocab": self.vocab.tokens() if self.vocab is not None else None,
                "vocab_hash": self.vocab_hash,
                "metrics": self.metrics,
                "meta": self.meta,
            },
            self.params,
        )

    @classmethod
    def load(cls, path: Path, expected_kind: Optional[str] = None) -> "ModelCheckpoint":
        header, tensors = read_container(path)
        kind = header.get("kind")
        if expected_kind is not None and kind != expected_kind:
            raise CheckpointError(f"{path} holds a '{kind}' checkpoint, expected '{expected_kind}'")
        vocab = vocab_from_tokens(header["vocab"]) if header.get("vocab") is not None else None
        if vocab is not None and header.get("vocab_hash") != vocab.vocab_hash:
            raise CheckpointError(f"{path}: vocabulary hash does not match its vocabulary")
        return cls(
            kind=kind,
            config=header.get("config", {}),
            params=tensors,
            vocab=vocab,
            metrics=header.get("metrics", {}),
            meta=header.get("meta", {}),
        )


def write_container(path: Path, header: Dict[str, Any], tensors: Dict[str, np.ndarray]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    index: List[Dict[str, Any]] = []
    blobs: List[bytes] = []
    offset = 0
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype=BLOB_DTYPE)
        raw = arr.tobytes(order="C")
        index.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(raw)
        offset += len(raw)

    header = dict(header)
    header["tensors"] = index
    header_bytes = json.dumps(header, ensure_ascii=False, sort_keys=True).encode("utf-8")

    with path.open("wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", FORMAT_VERSION, len(header_bytes)))
        f.write(header_bytes)
        for raw in blobs:
            f.write(raw)
    return path


def read_container(path: Path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Checkpoint not found at: {path}")
    data = path.read_bytes()
    if data[:4] != MAGIC:
        raise CheckpointError(f"{path} is not a log-triage container")
    version, header_len = struct.unpack("<II", data[4:12])
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported container version {version}")
    header = json.loads(data[12 : 12 + header_len].decode("utf-8"))
    blob_start = 12 + header_len

    tensors: Dict[str, np.ndarray] = {}
    for entry in header.get("tensors", []):
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = blob_start + entry["offset"]
        end = start + count * BLOB_DTYPE.itemsize
        if end > len(data):
            raise CheckpointError(f"{path}: tensor {entry['name']} is truncated")
        tensors[entry["name"]] = np.frombuffer(data[start:end], dtype=BLOB_DTYPE).reshape(shape).astype(np.float32)
    return header, tensors
