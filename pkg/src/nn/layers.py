"""
Stateful layer wrappers around src.nn.functional.

Each layer owns its parameter tensors and same-shaped gradient tensors
(LayerParams), caches what it needs during forward and fills its gradients in
backward. One forward must precede each backward.
"""
from typing import Dict, List, Optional, Set

import numpy as np

from src.nn import functional as F


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Layer:
    """Base class: named params and grads plus the names that take L2."""

    def __init__(self) -> None:
        self.params: Dict[str, np.ndarray] = {}
        self.grads: Dict[str, np.ndarray] = {}
        self.regularized: Set[str] = set()

    def forward(self, x):
        raise NotImplementedError

    def backward(self, grad_out):
        raise NotImplementedError

    def _zero_grads(self) -> None:
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}

    def param_count(self) -> int:
        return int(sum(p.size for p in self.params.values()))


class Embedding(Layer):
    def __init__(self, vocab_size: int, dim: int, rng: np.random.Generator, dtype=np.float32) -> None:
        super().__init__()
        # Keras-style uniform(-0.05, 0.05)
        self.params["table"] = rng.uniform(-0.05, 0.05, size=(vocab_size, dim)).astype(dtype)
        self._zero_grads()
        self._ids: Optional[np.ndarray] = None

    def forward(self, ids: np.ndarray) -> np.ndarray:
        self._ids = ids
        return F.embedding_lookup(ids, self.params["table"])

    def backward(self, grad_out: np.ndarray) -> None:
        self.grads["table"] = F.embedding_backward(grad_out, self._ids, self.params["table"].shape)
        return None


class Conv1D(Layer):
    def __init__(self, c_in: int, c_out: int, kernel_size: int, rng: np.random.Generator, dtype=np.float32) -> None:
        super().__init__()
        if kernel_size % 2 == 0:
            raise ValueError(f"kernel_size must be odd, got {kernel_size}")
        self.params["kernels"] = glorot_uniform(
            rng, kernel_size * c_in, kernel_size * c_out, (kernel_size, c_in, c_out), dtype
        )
        self.params["bias"] = np.zeros(c_out, dtype=dtype)
        self._zero_grads()
        self._x: Optional[np.ndarray] = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        return F.conv1d(x, self.params["kernels"], self.params["bias"])

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        dx, dk, db = F.conv1d_backward(grad_out, self._x, self.params["kernels"])
        self.grads["kernels"] = dk
        self.grads["bias"] = db
        return dx


class Dense(Layer):
    def __init__(
        self, d_in: int, d_out: int, rng: np.random.Generator, dtype=np.float32, l2: bool = True
    ) -> None:
        super().__init__()
        self.params["weight"] = glorot_uniform(rng, d_in, d_out, (d_in, d_out), dtype)
        self.params["bias"] = np.zeros(d_out, dtype=dtype)
        if l2:
            self.regularized.add("weight")
        self._zero_grads()
        self._x: Optional[np.ndarray] = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        return F.dense(x, self.params["weight"], self.params["bias"])

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        dx, dw, db = F.dense_backward(grad_out, self._x, self.params["weight"])
        self.grads["weight"] = dw
        self.grads["bias"] = db
        return dx


class ReLU(Layer):
    def __init__(self) -> None:
        super().__init__()
        self._x: Optional[np.ndarray] = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        return F.relu(x)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        return F.relu_backward(grad_out, self._x)


class GlobalMaxPool1D(Layer):
    def __init__(self) -> None:
        super().__init__()
        self._argmax: Optional[np.ndarray] = None
        self._shape = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        pooled, self._argmax = F.global_max_pool1d(x)
        self._shape = x.shape
        return pooled

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        return F.global_max_pool1d_backward(grad_out, self._argmax, self._shape)


class LSTM(Layer):
    def __init__(
        self,
        d_in: int,
        units: int,
        rng: np.random.Generator,
        dtype=np.float32,
        return_sequences: bool = True,
        bidirectional: bool = False,
    ) -> None:
        super().__init__()
        self.units = units
        self.return_sequences = return_sequences
        self.bidirectional = bidirectional
        suffixes = ["", "_rev"] if bidirectional else [""]
        for s in suffixes:
            self.params["W" + s] = glorot_uniform(rng, d_in, 4 * units, (d_in, 4 * units), dtype)
            self.params["U" + s] = glorot_uniform(rng, units, 4 * units, (units, 4 * units), dtype)
            bias = np.zeros(4 * units, dtype=dtype)
            bias[units : 2 * units] = 1.0  # forget-gate bias of one
            self.params["b" + s] = bias
        self._zero_grads()
        self._cache = None

    @property
    def out_dim(self) -> int:
        return 2 * self.units if self.bidirectional else self.units

    def forward(self, x: np.ndarray) -> np.ndarray:
        out, self._cache = F.lstm_forward(x, self.params, self.return_sequences, self.bidirectional)
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        dx, grads = F.lstm_backward(grad_out, self._cache, self.params)
        self.grads.update(grads)
        return dx


class ResidualConvBlock(Layer):
    """
    relu(conv(x)) + skip(x); skip is the identity when channel counts match and
    a 1x1 projection conv otherwise. With residual=False the block is just
    relu(conv(x)).
    """

    def __init__(
        self, c_in: int, c_out: int, kernel_size: int, rng: np.random.Generator, dtype=np.float32, residual: bool = True
    ) -> None:
        super().__init__()
        self.residual = residual
        self.conv = Conv1D(c_in, c_out, kernel_size, rng, dtype)
        self.act = ReLU()
        self.projection = Conv1D(c_in, c_out, 1, rng, dtype) if residual and c_in != c_out else None
        self._refresh_views()

    def sublayers(self) -> Dict[str, Layer]:
        layers: Dict[str, Layer] = {"conv": self.conv}
        if self.projection is not None:
            layers["proj"] = self.projection
        return layers

    def _refresh_views(self) -> None:
        self.params = {f"{n}.{k}": v for n, layer in self.sublayers().items() for k, v in layer.params.items()}
        self.grads = {f"{n}.{k}": v for n, layer in self.sublayers().items() for k, v in layer.grads.items()}

    def forward(self, x: np.ndarray) -> np.ndarray:
        out = self.act.forward(self.conv.forward(x))
        if not self.residual:
            return out
        skip = self.projection.forward(x) if self.projection is not None else x
        return out + skip

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        dx = self.conv.backward(self.act.backward(grad_out))
        if self.residual:
            dx = dx + (self.projection.backward(grad_out) if self.projection is not None else grad_out)
        self._refresh_views()
        return dx


def collect(layers: Dict[str, Layer]) -> List[tuple]:
    """(qualified name, layer, param key) for every parameter in layer order."""
    out = []
    for name, layer in layers.items():
        if isinstance(layer, ResidualConvBlock):
            for sub_name, sub in layer.sublayers().items():
                for key in sub.params:
                    out.append((f"{name}.{sub_name}.{key}", sub, key))
        else:
            for key in layer.params:
                out.append((f"{name}.{key}", layer, key))
    return out
