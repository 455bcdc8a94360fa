"""
Residual 1D-CNN for log classification.

embedding -> [BiLSTM] -> residual Conv1D blocks -> global max pool
-> dense(ReLU) layers -> dense(n_classes) logits (softmax applied by the loss
and at prediction time).
"""
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.config.seeding import module_rng
from src.models.checkpoint import CheckpointError, ModelCheckpoint
from src.models.training import resolve_dtype
from src.nn.functional import ShapeError
from src.nn.layers import LSTM, Dense, Embedding, GlobalMaxPool1D, Layer, ReLU, ResidualConvBlock, collect
from src.vocab.char_vocab import CharVocab

MAX_SUPPORTED_LEN = 200_000


def default_conv_layers() -> List[Tuple[int, int]]:
    return [(256, 5), (256, 5), (256, 5)]


@dataclass
class ArchConfig:
    max_len: int = 50_000
    embed_dim: int = 64
    conv_layers: List[Tuple[int, int]] = field(default_factory=default_conv_layers)
    residual: bool = True
    dense_units: List[int] = field(default_factory=lambda: [64])
    n_classes: int = 4
    bilstm_front: bool = False
    bilstm_units: int = 32
    truncation: str = "head"
    precision: str = "float32"

    def __post_init__(self) -> None:
        self.conv_layers = [tuple(int(v) for v in layer) for layer in self.conv_layers]
        self.dense_units = [int(u) for u in self.dense_units]
        if not 1 <= self.max_len <= MAX_SUPPORTED_LEN:
            raise ValueError(f"max_len must be in [1, {MAX_SUPPORTED_LEN}], got {self.max_len}")
        if not self.conv_layers:
            raise ValueError("At least one conv layer is required.")
        for filters, kernel in self.conv_layers:
            if filters < 1 or kernel < 1 or kernel % 2 == 0:
                raise ValueError(f"Conv layer ({filters}x{kernel}) needs positive filters and an odd kernel size")
        if self.n_classes < 2:
            raise ValueError("n_classes must be >= 2")
        resolve_dtype(self.precision)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["conv_layers"] = [list(layer) for layer in self.conv_layers]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ArchConfig":
        return cls(**d)


class ResidualCNN:
    def __init__(self, arch: ArchConfig, vocab_size: int, rng: np.random.Generator) -> None:
        self.arch = arch
        self.vocab_size = vocab_size
        dtype = resolve_dtype(arch.precision)

        seq: List[Tuple[str, Layer]] = [("embedding", Embedding(vocab_size, arch.embed_dim, rng, dtype))]
        channels = arch.embed_dim
        if arch.bilstm_front:
            bilstm = LSTM(channels, arch.bilstm_units, rng, dtype, return_sequences=True, bidirectional=True)
            seq.append(("bilstm", bilstm))
            channels = bilstm.out_dim
        for i, (filters, kernel) in enumerate(arch.conv_layers):
            seq.append((f"conv{i}", ResidualConvBlock(channels, filters, kernel, rng, dtype, residual=arch.residual)))
            channels = filters
        seq.append(("pool", GlobalMaxPool1D()))
        for i, units in enumerate(arch.dense_units):
            seq.append((f"dense{i}", Dense(channels, units, rng, dtype)))
            seq.append((f"relu{i}", ReLU()))
            channels = units
        seq.append(("output", Dense(channels, arch.n_classes, rng, dtype)))
        self.sequence = seq
        self._index = collect(dict(seq))

    def forward(self, ids: np.ndarray) -> np.ndarray:
        """ids (B, T) -> logits (B, n_classes)."""
        x = ids
        for _, layer in self.sequence:
            x = layer.forward(x)
        return x

    def backward(self, grad_logits: np.ndarray) -> None:
        g = grad_logits
        for _, layer in reversed(self.sequence):
            g = layer.backward(g)

    def parameters(self) -> Dict[str, np.ndarray]:
        return {name: layer.params[key] for name, layer, key in self._index}

    def gradients(self) -> Dict[str, np.ndarray]:
        return {name: layer.grads[key] for name, layer, key in self._index}

    def regularized_names(self) -> List[str]:
        return [name for name, layer, key in self._index if key in layer.regularized]

    def param_count(self) -> int:
        return int(sum(p.size for p in self.parameters().values()))

    @property
    def embedding_table(self) -> np.ndarray:
        return self.sequence[0][1].params["table"]

    def to_checkpoint(self, vocab: CharVocab, metrics: Optional[dict] = None) -> ModelCheckpoint:
        return ModelCheckpoint(
            kind="classifier",
            config=self.arch.to_dict(),
            params={k: v.copy() for k, v in self.parameters().items()},
            vocab=vocab,
            metrics=metrics or {},
        )

    @classmethod
    def from_checkpoint(cls, ckpt: ModelCheckpoint) -> "ResidualCNN":
        if ckpt.kind != "classifier":
            raise CheckpointError(f"Expected a classifier checkpoint, got '{ckpt.kind}'")
        if ckpt.vocab is None:
            raise CheckpointError("Classifier checkpoint has no vocabulary")
        arch = ArchConfig.from_dict(ckpt.config)
        model = cls(arch, ckpt.vocab.size, np.random.default_rng(0))
        live = model.parameters()
        if set(live) != set(ckpt.params):
            raise CheckpointError("Checkpoint parameters do not match the architecture in its header")
        dtype = resolve_dtype(arch.precision)
        for name, value in ckpt.params.items():
            if live[name].shape != value.shape:
                raise CheckpointError(f"Parameter {name}: checkpoint shape {value.shape} != {live[name].shape}")
            live[name][...] = value.astype(dtype)
        return model


def build_model(
    arch: ArchConfig,
    vocab_size: int,
    init_embeddings: Optional[np.ndarray] = None,
    seed: int = 0,
) -> ResidualCNN:
    """
    Build the classifier; when init_embeddings (V, E) is given its rows are
    copied into the embedding layer, otherwise the table is random.
    """
    model = ResidualCNN(arch, vocab_size, module_rng(seed, "clf.init"))
    if init_embeddings is not None:
        expected = (vocab_size, arch.embed_dim)
        if init_embeddings.shape != expected:
            raise ShapeError(f"init_embeddings has shape {init_embeddings.shape}, model expects {expected}")
        model.embedding_table[...] = init_embeddings
    return model


def classifier_param_count(arch: ArchConfig, vocab_size: int) -> int:
    count = vocab_size * arch.embed_dim
    channels = arch.embed_dim
    if arch.bilstm_front:
        u = arch.bilstm_units
        count += 2 * 4 * ((channels + u) * u + u)
        channels = 2 * u
    for filters, kernel in arch.conv_layers:
        count += kernel * channels * filters + filters
        if arch.residual and channels != filters:
            count += channels * filters + filters
        channels = filters
    for units in arch.dense_units:
        count += channels * units + units
        channels = units
    count += channels * arch.n_classes + arch.n_classes
    return count
