from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from src.config.seeding import module_rng
from src.corpus.records import CLASS_NAMES
from src.models.metrics import Metrics, compute_metrics
from src.models.train_classifier import class_weights
from src.models.training import check_finite, minibatches
from src.nn.functional import ShapeError, softmax, softmax_cross_entropy
from src.nn.layers import Dense
from src.nn.optim import Adam


@dataclass
class HeadConfig:
    lr: float = 1e-2
    epochs: int = 200
    batch_size: int = 64
    l2: float = 0.0
    use_class_weights: bool = True
    seed: int = 0


class EmbeddingClassifier:
    """Multinomial logistic regression on document embeddings (one dense layer + softmax)."""

    def __init__(self, dim: int, n_classes: int, cfg: Optional[HeadConfig] = None) -> None:
        if dim < 1 or n_classes < 2:
            raise ValueError(f"Need dim >= 1 and n_classes >= 2, got dim={dim}, n_classes={n_classes}")
        self.cfg = cfg or HeadConfig()
        self.dim = dim
        self.n_classes = n_classes
        self.class_names: List[str] = (
            list(CLASS_NAMES[:n_classes]) if n_classes <= len(CLASS_NAMES) else [f"class_{i}" for i in range(n_classes)]
        )
        self.head = Dense(dim, n_classes, module_rng(self.cfg.seed, "embed_head.init"), dtype=np.float64)
        self.history: List[float] = []

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise ShapeError(f"Expected embeddings of shape (N, {self.dim}), got {x.shape}")
        return x

    def fit(self, x: np.ndarray, labels: Sequence[int]) -> "EmbeddingClassifier":
        x = self._check(x)
        y = np.asarray(labels, dtype=np.int64)
        if len(x) != len(y):
            raise ShapeError(f"{len(x)} embeddings but {len(y)} labels")
        if y.min() < 0 or y.max() >= self.n_classes:
            raise ValueError(f"labels must lie in [0, {self.n_classes})")

        if self.cfg.use_class_weights:
            counts = {name: int(np.sum(y == i)) for i, name in enumerate(self.class_names)}
            weights = class_weights(counts, self.class_names)
        else:
            weights = np.ones(self.n_classes)

        optimizer = Adam(lr=self.cfg.lr, l2=self.cfg.l2)
        rng = module_rng(self.cfg.seed, "embed_head.train")
        for epoch in range(1, self.cfg.epochs + 1):
            total = 0.0
            for idx in minibatches(len(x), self.cfg.batch_size, rng):
                loss, grad = softmax_cross_entropy(self.head.forward(x[idx]), y[idx], weights)
                check_finite(loss, f"head epoch {epoch}")
                self.head.backward(grad)
                optimizer.step(self.head.params, self.head.grads, self.head.regularized)
                total += loss * len(idx)
            self.history.append(total / len(x))
        return self

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return softmax(self.head.forward(self._check(x)))

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(x), axis=1)

    def classify(self, vector: np.ndarray) -> str:
        return self.class_names[int(self.predict(np.asarray(vector)[None])[0])]

    def evaluate(self, x: np.ndarray, labels: Sequence[int]) -> Metrics:
        return compute_metrics(labels, self.predict(x), self.class_names)


def embed_classifier(
    train_embeddings: np.ndarray,
    labels: Sequence[int],
    n_classes: int = len(CLASS_NAMES),
    cfg: Optional[HeadConfig] = None,
) -> EmbeddingClassifier:
    train_embeddings = np.asarray(train_embeddings, dtype=np.float64)
    if train_embeddings.ndim != 2:
        raise ShapeError(f"train_embeddings must be 2-D, got shape {train_embeddings.shape}")
    return EmbeddingClassifier(train_embeddings.shape[1], n_classes, cfg).fit(train_embeddings, labels)
