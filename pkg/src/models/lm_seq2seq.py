"""
Character-level sequence-to-sequence LSTM language model.

embedding (V x E) -> LSTM (H units, returns sequences) -> dense (V) applied at
every timestep with one shared weight matrix. Trained on
(s_i, s_t) pairs where s_t is s_i shifted by l_w characters; the learned
embedding table initialises the classifier.
"""
import re
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, Iterator, List, NamedTuple, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from src.config.seeding import module_rng
from src.models.checkpoint import CheckpointError, ModelCheckpoint, write_container
from src.models.training import check_finite, minibatches, resolve_dtype, restore, snapshot
from src.nn.functional import softmax, softmax_cross_entropy
from src.nn.layers import LSTM, Dense, Embedding, collect
from src.nn.optim import Adam
from src.run_log import log_event
from src.vocab.char_vocab import CharVocab, encode

BLOCK_START = re.compile(r"^[ \t]*(?:I:|C:)", flags=re.MULTILINE)


@dataclass
class LmConfig:
    seq_len: Optional[int] = None  # None -> median message-block length
    shift: int = 1
    embed_dim: int = 64
    lstm_units: int = 1024
    lr: float = 1e-4
    batch_size: int = 64
    max_epochs: int = 200
    early_stop_patience: int = 30
    max_steps: Optional[int] = None
    max_pairs: Optional[int] = None
    l2: float = 0.0
    seed: int = 0
    precision: str = "float32"

    def __post_init__(self) -> None:
        if self.seq_len is not None and not 1 <= self.shift <= self.seq_len:
            raise ValueError(f"shift must satisfy 1 <= shift <= seq_len, got shift={self.shift}, seq_len={self.seq_len}")
        if self.shift < 1 or self.embed_dim < 1 or self.lstm_units < 1 or self.batch_size < 1:
            raise ValueError("LM dimensions, shift and batch size must be positive")
        if self.early_stop_patience < 0:
            raise ValueError(f"early_stop_patience must be >= 0, got {self.early_stop_patience}")
        resolve_dtype(self.precision)

    def to_dict(self) -> dict:
        return asdict(self)


class SequencePair(NamedTuple):
    inputs: np.ndarray
    targets: np.ndarray


class NoBlocksError(ValueError):
    """Raised when a corpus has no I:/C: message blocks to size sequences by."""


def block_lengths(corpus: str) -> List[int]:
    starts = [m.start() for m in BLOCK_START.finditer(corpus)]
    ends = starts[1:] + [len(corpus)]
    return [e - s for s, e in zip(starts, ends)]


def median_block_length(corpus: str) -> int:
    """
    Median character length of message blocks (lower median for even counts).

    A block runs from a line starting with "I:" or "C:" (after optional
    leading spaces/tabs) up to the next such line or the end of the corpus.
    """
    lengths = sorted(block_lengths(corpus))
    if not lengths:
        raise NoBlocksError(
            "No I:/C: message blocks found in the corpus; set the LM sequence length explicitly (lm.seq_len)."
        )
    return lengths[(len(lengths) - 1) // 2]


def pair_count(corpus_len: int, l_s: int, l_w: int) -> int:
    return (corpus_len - l_s - l_w) // l_w + 1


class SequenceWindows:
    """
    The (s_i, s_t) pairs of a corpus, addressed by pair index.

    Pair j: inputs ids[j*l_w : j*l_w + l_s], targets ids[j*l_w + l_w : j*l_w + l_w + l_s].
    A trailing remainder that cannot form a full pair is dropped. Windows are a
    strided view over corpus_ids; only the pairs of one batch are ever copied.
    """

    def __init__(self, corpus_ids: np.ndarray, l_s: int, l_w: int = 1, limit: Optional[int] = None) -> None:
        corpus_ids = np.asarray(corpus_ids)
        if l_s < 1 or not 1 <= l_w <= l_s:
            raise ValueError(f"Need 1 <= l_w <= l_s, got l_s={l_s}, l_w={l_w}")
        if len(corpus_ids) < l_s + l_w:
            raise ValueError(f"Corpus of {len(corpus_ids)} ids is too short for l_s={l_s}, l_w={l_w}")
        self.corpus_ids = corpus_ids
        self.l_s = l_s
        self.l_w = l_w
        self.windows = sliding_window_view(corpus_ids, l_s)
        n = pair_count(len(corpus_ids), l_s, l_w)
        if limit is not None:
            n = min(n, limit)
        self.starts = np.arange(n) * l_w

    def __len__(self) -> int:
        return len(self.starts)

    def __iter__(self) -> Iterator[SequencePair]:
        for start in self.starts:
            yield SequencePair(self.windows[start], self.windows[start + self.l_w])

    def batch(self, idx: np.ndarray) -> SequencePair:
        starts = self.starts[idx]
        return SequencePair(self.windows[starts].astype(np.int32), self.windows[starts + self.l_w].astype(np.int64))


def make_sequence_pairs(corpus_ids: np.ndarray, l_s: int, l_w: int = 1) -> Iterator[SequencePair]:
    """Lazy stream of every sequence pair, in corpus order."""
    yield from SequenceWindows(corpus_ids, l_s, l_w)


class CharLanguageModel:
    def __init__(self, cfg: LmConfig, vocab_size: int, rng: np.random.Generator) -> None:
        dtype = resolve_dtype(cfg.precision)
        self.cfg = cfg
        self.vocab_size = vocab_size
        self.embedding = Embedding(vocab_size, cfg.embed_dim, rng, dtype)
        self.lstm = LSTM(cfg.embed_dim, cfg.lstm_units, rng, dtype, return_sequences=True)
        self.output = Dense(cfg.lstm_units, vocab_size, rng, dtype)
        self._index = collect({"embedding": self.embedding, "lstm": self.lstm, "output": self.output})

    def forward(self, ids: np.ndarray) -> np.ndarray:
        """ids (B, T) -> per-timestep logits (B, T, V)."""
        return self.output.forward(self.lstm.forward(self.embedding.forward(ids)))

    def backward(self, grad_logits: np.ndarray) -> None:
        self.embedding.backward(self.lstm.backward(self.output.backward(grad_logits)))

    def loss_and_grad(self, inputs: np.ndarray, targets: np.ndarray) -> Tuple[float, np.ndarray]:
        logits = self.forward(inputs)
        b, t, v = logits.shape
        loss, grad = softmax_cross_entropy(logits.reshape(b * t, v), targets.reshape(-1))
        return loss, grad.reshape(b, t, v)

    def parameters(self) -> Dict[str, np.ndarray]:
        return {name: layer.params[key] for name, layer, key in self._index}

    def gradients(self) -> Dict[str, np.ndarray]:
        return {name: layer.grads[key] for name, layer, key in self._index}

    def regularized_names(self) -> List[str]:
        return [name for name, layer, key in self._index if key in layer.regularized]

    def param_count(self) -> int:
        return int(sum(p.size for p in self.parameters().values()))

    def to_checkpoint(self, vocab: CharVocab, metrics: Optional[dict] = None) -> ModelCheckpoint:
        return ModelCheckpoint(
            kind="lm",
            config=self.cfg.to_dict(),
            params={k: v.copy() for k, v in self.parameters().items()},
            vocab=vocab,
            metrics=metrics or {},
        )

    @classmethod
    def from_checkpoint(cls, ckpt: ModelCheckpoint) -> "CharLanguageModel":
        if ckpt.kind != "lm" or ckpt.vocab is None:
            raise CheckpointError("Expected a language-model checkpoint with a vocabulary")
        cfg = LmConfig(**ckpt.config)
        model = cls(cfg, ckpt.vocab.size, np.random.default_rng(0))
        live = model.parameters()
        if set(live) != set(ckpt.params):
            raise CheckpointError("LM checkpoint parameters do not match its config")
        for name, value in ckpt.params.items():
            if live[name].shape != value.shape:
                raise CheckpointError(f"Parameter {name}: checkpoint shape {value.shape} != {live[name].shape}")
            live[name][...] = value
        return model


def lm_loss(model: CharLanguageModel, windows: SequenceWindows, batch_size: int = 64) -> float:
    """Mean per-character cross-entropy over all pairs."""
    total = 0.0
    for start in range(0, len(windows), batch_size):
        idx = np.arange(start, min(start + batch_size, len(windows)))
        inputs, targets = windows.batch(idx)
        loss, _ = model.loss_and_grad(inputs, targets)
        total += loss * len(idx)
    return total / len(windows)


def lm_train(
    corpus_ids: np.ndarray,
    vocab: CharVocab,
    cfg: LmConfig,
    checkpoint_dir: Optional[Path] = None,
) -> ModelCheckpoint:
    """
    Minimise per-character cross-entropy of the shifted target sequence.

    Pairs are cut from corpus_ids with cfg.seq_len and cfg.shift, one
    minibatch at a time. One epoch is one pass over the pairs. The
    best-training-loss weights are kept; training stops once
    `early_stop_patience` epochs in a row fail to improve, after max_epochs,
    or after max_steps optimizer steps. With a checkpoint_dir, lm_last.ckpt
    is written every epoch and lm_best.ckpt whenever the loss improves.
    """
    if cfg.seq_len is None:
        raise ValueError("lm_train needs a concrete seq_len; resolve it with median_block_length first")
    corpus_ids = np.asarray(corpus_ids)
    if corpus_ids.size and corpus_ids.max() >= vocab.size:
        raise ValueError("Corpus contains ids outside the vocabulary")
    windows = SequenceWindows(corpus_ids, cfg.seq_len, cfg.shift, limit=cfg.max_pairs)

    model = CharLanguageModel(cfg, vocab.size, module_rng(cfg.seed, "lm.init"))
    rng = module_rng(cfg.seed, "lm.train")
    optimizer = Adam(lr=cfg.lr, l2=cfg.l2)
    params = model.parameters()
    regularized = model.regularized_names()

    initial_loss = lm_loss(model, windows, cfg.batch_size)
    log_event(f"LM: {len(windows)} pairs of length {windows.l_s}, {model.param_count():,} parameters, initial loss {initial_loss:.4f}")

    history: List[float] = []
    best_loss = np.inf
    best_params = snapshot(params)
    wait = 0
    steps = 0
    done = False

    for epoch in range(1, cfg.max_epochs + 1):
        epoch_loss = 0.0
        seen = 0
        for idx in minibatches(len(windows), cfg.batch_size, rng):
            inputs, targets = windows.batch(idx)
            loss, grad = model.loss_and_grad(inputs, targets)
            check_finite(loss, f"LM epoch {epoch}, step {steps + 1}")
            model.backward(grad)
            optimizer.step(params, model.gradients(), regularized)
            epoch_loss += loss * len(idx)
            seen += len(idx)
            steps += 1
            if cfg.max_steps is not None and steps >= cfg.max_steps:
                done = True
                break

        epoch_loss /= seen
        history.append(epoch_loss)
        log_event(f"  LM epoch {epoch:3d}  loss {epoch_loss:.4f}")

        improved = epoch_loss < best_loss
        if improved:
            best_loss = epoch_loss
            best_params = snapshot(params)
            wait = 0
        else:
            wait += 1

        if checkpoint_dir is not None:
            metrics = {"epoch": epoch, "loss": epoch_loss}
            model.to_checkpoint(vocab, metrics).save(Path(checkpoint_dir) / "lm_last.ckpt")
            if improved:
                model.to_checkpoint(vocab, metrics).save(Path(checkpoint_dir) / "lm_best.ckpt")

        # patience 0 stops at the first non-improving epoch, like patience 1
        if done or wait >= max(1, cfg.early_stop_patience):
            break

    restore(params, best_params)
    return model.to_checkpoint(
        vocab,
        metrics={"initial_loss": initial_loss, "best_loss": float(best_loss), "history": history, "steps": steps},
    )


def lm_param_count(cfg: LmConfig, vocab_size: int) -> int:
    v, e, h = vocab_size, cfg.embed_dim, cfg.lstm_units
    return v * e + 4 * ((e + h) * h + h) + (h * v + v)


def extract_char_embeddings(ckpt: ModelCheckpoint) -> Tuple[np.ndarray, CharVocab]:
    """Exact copy of the LM's embedding table, with the vocabulary it is indexed by."""
    if ckpt.kind != "lm" or ckpt.vocab is None:
        raise CheckpointError("Character embeddings can only be extracted from an LM checkpoint")
    table = ckpt.params.get("embedding.table")
    expected = (ckpt.vocab.size, int(ckpt.config.get("embed_dim", -1)))
    if table is None or table.shape != expected:
        shape = None if table is None else table.shape
        raise CheckpointError(f"Embedding table shape {shape} does not match config/vocab {expected}")
    return table.copy(), ckpt.vocab


def save_char_embeddings(path: Path, table: np.ndarray, vocab: CharVocab) -> Path:
    return write_container(
        path,
        {
            "kind": "char_embeddings",
            "config": {"V": int(table.shape[0]), "E": int(table.shape[1])},
            "vocab": vocab.tokens(),
            "vocab_hash": vocab.vocab_hash,
        },
        {"embeddings": table},
    )


def load_char_embeddings(path: Path, expected_vocab: Optional[CharVocab] = None) -> Tuple[np.ndarray, CharVocab]:
    ckpt = ModelCheckpoint.load(path, expected_kind="char_embeddings")
    table = ckpt.params["embeddings"]
    if table.shape != (ckpt.config["V"], ckpt.config["E"]):
        raise CheckpointError(f"{path}: header says {ckpt.config}, table is {table.shape}")
    if expected_vocab is not None and expected_vocab.vocab_hash != ckpt.vocab_hash:
        raise CheckpointError(f"{path}: embeddings were trained with a different vocabulary")
    return table, ckpt.vocab


def lm_next_char_probs(ckpt: ModelCheckpoint, prefix: str) -> np.ndarray:
    """Distribution over vocab ids for the character following prefix."""
    if not prefix:
        raise ValueError("prefix must be non-empty")
    model = CharLanguageModel.from_checkpoint(ckpt)
    ids = encode(prefix, ckpt.vocab, len(prefix))[None]
    logits = model.forward(ids)
    return softmax(logits[0, -1].astype(np.float64))
