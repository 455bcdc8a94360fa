from dataclasses import asdict, dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.model_selection import train_test_split

from src.config.seeding import module_rng
from src.corpus.records import CLASS_NAMES, LogRecord
from src.models.checkpoint import ModelCheckpoint
from src.models.log_cnn import ResidualCNN
from src.models.metrics import Metrics, compute_metrics
from src.models.training import check_finite, minibatches, restore, snapshot
from src.nn.functional import softmax, softmax_cross_entropy
from src.nn.optim import Adam
from src.run_log import log_event
from src.vocab.char_vocab import CharVocab, encode, encode_batch


@dataclass
class TrainConfig:
    lr: float = 1e-4
    max_epochs: int = 200
    early_stop_patience: int = 30
    batch_size: int = 32
    l2: float = 1e-4
    seed: int = 0
    val_fraction: float = 0.1
    test_fraction: float = 0.3
    use_class_weights: bool = True

    def __post_init__(self) -> None:
        if self.early_stop_patience < 0:
            raise ValueError(f"early_stop_patience must be >= 0, got {self.early_stop_patience}")
        if self.early_stop_patience >= self.max_epochs:
            raise ValueError(
                f"early_stop_patience ({self.early_stop_patience}) must be < max_epochs ({self.max_epochs})"
            )
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 < self.val_fraction < 1.0 or not 0.0 < self.test_fraction < 1.0:
            raise ValueError("val_fraction and test_fraction must be in (0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


def class_weights(label_counts: Mapping[str, int], class_names: Sequence[str] = CLASS_NAMES) -> np.ndarray:
    """weight_c = N_total / (n_classes * count_c), in class_names order."""
    counts = np.array([label_counts.get(name, 0) for name in class_names], dtype=np.float64)
    empty = [name for name, c in zip(class_names, counts) if c <= 0]
    if empty:
        raise ValueError(
            f"No samples for class(es) {', '.join(empty)}; merge those classes or resample before training."
        )
    return counts.sum() / (len(class_names) * counts)


def _stratify_or_none(labels: List[str], fraction: float, what: str) -> Optional[List[str]]:
    counts = pd.Series(labels).value_counts()
    if (counts < 2).any():
        log_event(f"⚠️ Some classes have fewer than 2 samples; {what} split is not stratified.")
        return None
    held_out = int(np.ceil(fraction * len(labels)))
    if held_out < len(counts) or len(labels) - held_out < len(counts):
        log_event(f"⚠️ Too few samples to give every class a place in the {what} split; it is not stratified.")
        return None
    return labels


def split_dataset(
    records: List[LogRecord], test_fraction: float = 0.3, val_fraction: float = 0.1, seed: int = 0
) -> Tuple[List[LogRecord], List[LogRecord], List[LogRecord]]:
    """
    Stratified train/test split, then a stratified validation split carved
    from the training portion. Returned lists are in id order.
    """
    labeled = [r for r in sorted(records, key=lambda r: r.id) if r.label is not None]
    if len(labeled) < 3:
        raise ValueError(f"Need at least 3 labeled records to split, got {len(labeled)}")

    labels = [r.label for r in labeled]
    train_val, test = train_test_split(
        labeled,
        test_size=test_fraction,
        random_state=seed,
        stratify=_stratify_or_none(labels, test_fraction, "train/test"),
    )
    tv_labels = [r.label for r in train_val]
    train, val = train_test_split(
        train_val,
        test_size=val_fraction,
        random_state=seed,
        stratify=_stratify_or_none(tv_labels, val_fraction, "train/validation"),
    )

    def by_id(rs):
        return sorted(rs, key=lambda r: r.id)

    return by_id(train), by_id(val), by_id(test)


def _encode_records(records: List[LogRecord], vocab: CharVocab, model: ResidualCNN) -> Tuple[np.ndarray, np.ndarray]:
    ids = encode_batch((r.text for r in records), vocab, model.arch.max_len, model.arch.truncation)
    labels = np.array([r.label_index for r in records], dtype=np.int64)
    return ids, labels


def predict_proba(model: ResidualCNN, ids: np.ndarray, batch_size: int = 32) -> np.ndarray:
    out = []
    for start in range(0, len(ids), batch_size):
        out.append(softmax(model.forward(ids[start : start + batch_size]).astype(np.float64)))
    if not out:
        return np.zeros((0, model.arch.n_classes))
    return np.concatenate(out)


def _eval_loss(model: ResidualCNN, ids: np.ndarray, labels: np.ndarray, batch_size: int) -> Tuple[float, np.ndarray]:
    total = 0.0
    preds = []
    for start in range(0, len(ids), batch_size):
        logits = model.forward(ids[start : start + batch_size])
        loss, _ = softmax_cross_entropy(logits, labels[start : start + batch_size])
        total += loss * len(logits)
        preds.append(np.argmax(logits, axis=1))
    return total / len(ids), np.concatenate(preds)


def train(
    model: ResidualCNN,
    train_set: List[LogRecord],
    val_set: List[LogRecord],
    cfg: TrainConfig,
    vocab: CharVocab,
) -> Tuple[ModelCheckpoint, pd.DataFrame]:
    """
    Train with class-weighted cross-entropy, Adam and L2 on dense weights.

    After every epoch the history gets loss / accuracy / micro-F1 for the
    training batches and the validation set. Training stops once the
    validation loss has not improved for `early_stop_patience` epochs; the
    weights of the best validation-loss epoch are restored and checkpointed.
    """
    if not train_set or not val_set:
        raise ValueError(f"Empty split: {len(train_set)} training and {len(val_set)} validation records")

    x_train, y_train = _encode_records(train_set, vocab, model)
    x_val, y_val = _encode_records(val_set, vocab, model)
    n_classes = model.arch.n_classes
    class_names = CLASS_NAMES[:n_classes]

    dtype = model.embedding_table.dtype
    if cfg.use_class_weights:
        counts = {name: int(np.sum(y_train == i)) for i, name in enumerate(class_names)}
        weights = class_weights(counts, class_names).astype(dtype)
    else:
        weights = np.ones(n_classes, dtype=dtype)

    rng = module_rng(cfg.seed, "clf.train")
    optimizer = Adam(lr=cfg.lr, l2=cfg.l2)
    params = model.parameters()
    regularized = model.regularized_names()

    history: List[Dict[str, float]] = []
    best_loss = np.inf
    best_epoch = 0
    best_params = snapshot(params)
    wait = 0

    for epoch in range(1, cfg.max_epochs + 1):
        epoch_loss = 0.0
        epoch_preds = np.empty_like(y_train)
        for b, idx in enumerate(minibatches(len(x_train), cfg.batch_size, rng)):
            logits = model.forward(x_train[idx])
            loss, grad = softmax_cross_entropy(logits, y_train[idx], weights)
            check_finite(loss, f"epoch {epoch}, batch {b}")
            model.backward(grad)
            optimizer.step(params, model.gradients(), regularized)
            epoch_loss += loss * len(idx)
            epoch_preds[idx] = np.argmax(logits, axis=1)

        train_metrics = compute_metrics(y_train, epoch_preds, class_names)
        val_loss, val_preds = _eval_loss(model, x_val, y_val, cfg.batch_size)
        check_finite(val_loss, f"epoch {epoch} validation")
        val_metrics = compute_metrics(y_val, val_preds, class_names)

        row = {
            "epoch": epoch,
            "loss": epoch_loss / len(x_train),
            "accuracy": train_metrics.accuracy,
            "f1_micro": train_metrics.f1_micro,
            "val_loss": val_loss,
            "val_accuracy": val_metrics.accuracy,
            "val_f1_micro": val_metrics.f1_micro,
        }
        history.append(row)
        log_event(
            f"  epoch {epoch:3d}  loss {row['loss']:.4f}  acc {row['accuracy']:.4f}  "
            f"val_loss {val_loss:.4f}  val_acc {row['val_accuracy']:.4f}  val_f1 {row['val_f1_micro']:.4f}"
        )

        if val_loss < best_loss:
            best_loss = val_loss
            best_epoch = epoch
            best_params = snapshot(params)
            wait = 0
        else:
            wait += 1
            # patience 0 stops at the first non-improving epoch, like patience 1
            if wait >= max(1, cfg.early_stop_patience):
                log_event(f"Early stopping at epoch {epoch}; best epoch was {best_epoch}.")
                break

    restore(params, best_params)
    ckpt = model.to_checkpoint(
        vocab,
        metrics={"best_epoch": best_epoch, "best_val_loss": float(best_loss), "train_config": cfg.to_dict()},
    )
    return ckpt, pd.DataFrame(history)


def predict(model: ResidualCNN, record: LogRecord, vocab: CharVocab) -> Tuple[str, np.ndarray]:
    """Class name and probabilities; exact ties go to the lowest class index."""
    ids = encode(record.text, vocab, model.arch.max_len, model.arch.truncation)[None]
    probs = predict_proba(model, ids)[0]
    return CLASS_NAMES[int(np.argmax(probs))], probs


def evaluate(model: ResidualCNN, test_set: List[LogRecord], vocab: CharVocab, batch_size: int = 32) -> Metrics:
    if not test_set:
        raise ValueError("Cannot evaluate on an empty test set.")
    ids, labels = _encode_records(test_set, vocab, model)
    preds = np.argmax(predict_proba(model, ids, batch_size), axis=1)
    return compute_metrics(labels, preds, CLASS_NAMES[: model.arch.n_classes])
