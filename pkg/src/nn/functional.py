"""
Forward and backward passes for every layer the two models use.

Arrays are numpy ndarrays ("tensors"): sequences are (batch, time, channels),
and the single-sequence (time, channels) form is accepted wherever the op is
defined per sequence. Backward functions take the upstream gradient plus what
the forward pass returned or cached and give gradients for inputs and
parameters. Everything is deterministic for fixed inputs.
"""
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np


class ShapeError(ValueError):
    """Raised when tensor shapes are incompatible with an op."""


def _as_batch(x: np.ndarray) -> Tuple[np.ndarray, bool]:
    if x.ndim == 2:
        return x[None], True
    if x.ndim == 3:
        return x, False
    raise ShapeError(f"Expected (T, C) or (B, T, C), got shape {x.shape}")


# --- conv1d -----------------------------------------------------------------


def conv1d(inputs: np.ndarray, kernels: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """
    "Same" 1D convolution (cross-correlation, stride 1).

    inputs (T, C_in) or (B, T, C_in), kernels (K, C_in, C_out), bias (C_out,).
    y[t, o] = bias[o] + sum_k sum_c kernels[k, c, o] * x[t + k - (K-1)/2, c],
    with zeros outside the sequence.
    """
    x, squeeze = _as_batch(inputs)
    if kernels.ndim != 3:
        raise ShapeError(f"kernels must be (K, C_in, C_out), got {kernels.shape}")
    k_size, c_in, c_out = kernels.shape
    if k_size % 2 == 0:
        raise ShapeError(f"Kernel size must be odd, got {k_size}")
    if x.shape[2] != c_in:
        raise ShapeError(f"Input has {x.shape[2]} channels, kernels expect {c_in}")
    if bias.shape != (c_out,):
        raise ShapeError(f"bias must be ({c_out},), got {bias.shape}")

    pad = (k_size - 1) // 2
    t_len = x.shape[1]
    xp = np.pad(x, ((0, 0), (pad, pad), (0, 0)))
    y = np.broadcast_to(bias, (x.shape[0], t_len, c_out)).copy()
    for k in range(k_size):
        y += xp[:, k : k + t_len, :] @ kernels[k]
    return y[0] if squeeze else y


def conv1d_backward(
    grad_out: np.ndarray, inputs: np.ndarray, kernels: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (d_inputs, d_kernels, d_bias)."""
    x, squeeze = _as_batch(inputs)
    dy, _ = _as_batch(grad_out)
    k_size, c_in, c_out = kernels.shape
    pad = (k_size - 1) // 2
    t_len = x.shape[1]
    xp = np.pad(x, ((0, 0), (pad, pad), (0, 0)))

    dy_flat = dy.reshape(-1, c_out)
    d_kernels = np.empty_like(kernels)
    dxp = np.zeros_like(xp)
    for k in range(k_size):
        window = xp[:, k : k + t_len, :]
        d_kernels[k] = window.reshape(-1, c_in).T @ dy_flat
        dxp[:, k : k + t_len, :] += dy @ kernels[k].T
    d_bias = dy_flat.sum(axis=0)
    dx = dxp[:, pad : pad + t_len, :]
    return (dx[0] if squeeze else dx), d_kernels, d_bias


# --- embedding --------------------------------------------------------------


def embedding_lookup(ids: np.ndarray, table: np.ndarray) -> np.ndarray:
    ids = np.asarray(ids)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ShapeError(f"Embedding id out of range for table with {table.shape[0]} rows")
    return table[ids]


def embedding_backward(grad_out: np.ndarray, ids: np.ndarray, table_shape: Tuple[int, int]) -> np.ndarray:
    """Scatter-add upstream rows into a zero table; duplicate ids accumulate."""
    d_table = np.zeros(table_shape, dtype=grad_out.dtype)
    np.add.at(d_table, np.asarray(ids).ravel(), grad_out.reshape(-1, table_shape[1]))
    return d_table


# --- dense ------------------------------------------------------------------


def dense(inputs: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Affine map over the last axis, broadcast over leading axes."""
    if inputs.shape[-1] != weight.shape[0]:
        raise ShapeError(f"Input last dim {inputs.shape[-1]} != weight rows {weight.shape[0]}")
    if bias.shape != (weight.shape[1],):
        raise ShapeError(f"bias must be ({weight.shape[1]},), got {bias.shape}")
    return inputs @ weight + bias


def dense_backward(
    grad_out: np.ndarray, inputs: np.ndarray, weight: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    d_in = grad_out @ weight.T
    d_weight = inputs.reshape(-1, weight.shape[0]).T @ grad_out.reshape(-1, weight.shape[1])
    d_bias = grad_out.reshape(-1, weight.shape[1]).sum(axis=0)
    return d_in, d_weight, d_bias


# --- activations & pooling --------------------------------------------------


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_backward(grad_out: np.ndarray, x: np.ndarray) -> np.ndarray:
    return grad_out * (x > 0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def global_max_pool1d(inputs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-channel max over time. Returns (pooled, argmax); ties resolve to the
    first time index, which is also where backward routes the gradient.
    """
    x, squeeze = _as_batch(inputs)
    if x.shape[1] == 0:
        raise ShapeError("global_max_pool1d needs at least one timestep")
    argmax = np.argmax(x, axis=1)  # (B, C)
    pooled = np.take_along_axis(x, argmax[:, None, :], axis=1)[:, 0, :]
    if squeeze:
        return pooled[0], argmax[0]
    return pooled, argmax


def global_max_pool1d_backward(grad_out: np.ndarray, argmax: np.ndarray, input_shape: Tuple[int, ...]) -> np.ndarray:
    squeeze = len(input_shape) == 2
    shape = (1,) + tuple(input_shape) if squeeze else tuple(input_shape)
    g = grad_out[None] if squeeze else grad_out
    am = argmax[None] if squeeze else argmax
    dx = np.zeros(shape, dtype=g.dtype)
    np.put_along_axis(dx, am[:, None, :], g[:, None, :], axis=1)
    return dx[0] if squeeze else dx


# --- softmax / loss ---------------------------------------------------------


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(
    logits: np.ndarray, targets: np.ndarray, class_weights: Optional[np.ndarray] = None
) -> Tuple[float, np.ndarray]:
    """
    Class-weighted categorical cross-entropy over a (B, C) batch.

    loss = (1/B) * sum_b w[y_b] * -log softmax(logits_b)[y_b]; the returned
    gradient is d loss / d logits.
    """
    if logits.ndim != 2:
        raise ShapeError(f"logits must be (B, C), got {logits.shape}")
    n, n_classes = logits.shape
    targets = np.asarray(targets, dtype=np.int64)
    if targets.shape != (n,):
        raise ShapeError(f"targets must be ({n},), got {targets.shape}")
    if n and (targets.min() < 0 or targets.max() >= n_classes):
        raise ValueError(f"Target id outside [0, {n_classes})")
    if class_weights is None:
        class_weights = np.ones(n_classes, dtype=logits.dtype)
    if class_weights.shape != (n_classes,):
        raise ShapeError(f"class_weights must be ({n_classes},), got {class_weights.shape}")
    if np.any(class_weights <= 0):
        raise ValueError("class_weights must be positive")

    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_z
    rows = np.arange(n)
    w = class_weights[targets]
    loss = float(np.sum(w * -log_probs[rows, targets]) / n)

    grad = np.exp(log_probs)
    grad[rows, targets] -= 1.0
    grad *= (w / n)[:, None]
    return loss, grad.astype(logits.dtype, copy=False)


# --- LSTM -------------------------------------------------------------------


@dataclass
class LstmCache:
    inputs: np.ndarray
    gates: np.ndarray  # (B, T, 4H) post-activation i, f, g, o
    cells: np.ndarray  # (B, T, H)
    hidden: np.ndarray  # (B, T, H)


def _lstm_direction(x: np.ndarray, w: np.ndarray, u: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, LstmCache]:
    batch, t_len, _ = x.shape
    h_units = u.shape[0]
    x_proj = x @ w + b  # (B, T, 4H)
    gates = np.empty_like(x_proj)
    cells = np.empty((batch, t_len, h_units), dtype=x_proj.dtype)
    hidden = np.empty_like(cells)
    h = np.zeros((batch, h_units), dtype=x_proj.dtype)
    c = np.zeros_like(h)
    for t in range(t_len):
        z = x_proj[:, t] + h @ u
        i = sigmoid(z[:, :h_units])
        f = sigmoid(z[:, h_units : 2 * h_units])
        g = np.tanh(z[:, 2 * h_units : 3 * h_units])
        o = sigmoid(z[:, 3 * h_units :])
        c = f * c + i * g
        h = o * np.tanh(c)
        gates[:, t] = np.concatenate([i, f, g, o], axis=1)
        cells[:, t] = c
        hidden[:, t] = h
    return hidden, LstmCache(inputs=x, gates=gates, cells=cells, hidden=hidden)


def _lstm_direction_backward(
    d_hidden: np.ndarray, cache: LstmCache, w: np.ndarray, u: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    batch, t_len, h_units = d_hidden.shape
    d_proj = np.empty_like(cache.gates)
    d_u = np.zeros_like(u)
    dh_next = np.zeros((batch, h_units), dtype=d_hidden.dtype)
    dc_next = np.zeros_like(dh_next)
    for t in reversed(range(t_len)):
        gates = cache.gates[:, t]
        i = gates[:, :h_units]
        f = gates[:, h_units : 2 * h_units]
        g = gates[:, 2 * h_units : 3 * h_units]
        o = gates[:, 3 * h_units :]
        c = cache.cells[:, t]
        c_prev = cache.cells[:, t - 1] if t > 0 else np.zeros_like(c)
        h_prev = cache.hidden[:, t - 1] if t > 0 else np.zeros_like(c)

        dh = d_hidden[:, t] + dh_next
        tanh_c = np.tanh(c)
        do = dh * tanh_c
        dc = dc_next + dh * o * (1.0 - tanh_c**2)
        di = dc * g
        dg = dc * i
        df = dc * c_prev
        dz = np.concatenate(
            [di * i * (1.0 - i), df * f * (1.0 - f), dg * (1.0 - g**2), do * o * (1.0 - o)], axis=1
        )
        d_proj[:, t] = dz
        d_u += h_prev.T @ dz
        dh_next = dz @ u.T
        dc_next = dc * f

    d_w = cache.inputs.reshape(-1, w.shape[0]).T @ d_proj.reshape(-1, w.shape[1])
    d_b = d_proj.reshape(-1, w.shape[1]).sum(axis=0)
    d_x = d_proj @ w.T
    return d_x, d_w, d_u, d_b


@dataclass
class LstmForwardCache:
    forward: LstmCache
    backward: Optional[LstmCache]
    return_sequences: bool
    squeeze: bool
    t_len: int


def lstm_forward(
    inputs: np.ndarray,
    params: Dict[str, np.ndarray],
    return_sequences: bool = True,
    bidirectional: bool = False,
) -> Tuple[np.ndarray, LstmForwardCache]:
    """
    LSTM over (T, D) or (B, T, D) with zero initial states.

    params holds "W" (D, 4H), "U" (H, 4H), "b" (4H,) with gate order
    input, forget, candidate, output; bidirectional adds "W_rev", "U_rev",
    "b_rev" for a pass over the reversed sequence, concatenated after the
    forward features (2H channels). Without return_sequences the final state
    of each direction is returned.
    """
    x, squeeze = _as_batch(inputs)
    w, u, b = params["W"], params["U"], params["b"]
    if w.shape[0] != x.shape[2] or w.shape[1] != 4 * u.shape[0] or u.shape[0] * 4 != u.shape[1] or b.shape != (w.shape[1],):
        raise ShapeError(
            f"LSTM params W{w.shape} U{u.shape} b{b.shape} do not fit inputs with {x.shape[2]} features"
        )
    h_fwd, cache_fwd = _lstm_direction(x, w, u, b)
    cache_bwd = None
    if bidirectional:
        h_rev, cache_bwd = _lstm_direction(x[:, ::-1], params["W_rev"], params["U_rev"], params["b_rev"])
        if return_sequences:
            out = np.concatenate([h_fwd, h_rev[:, ::-1]], axis=2)
        else:
            out = np.concatenate([h_fwd[:, -1], h_rev[:, -1]], axis=1)
    else:
        out = h_fwd if return_sequences else h_fwd[:, -1]

    cache = LstmForwardCache(cache_fwd, cache_bwd, return_sequences, squeeze, x.shape[1])
    return (out[0] if squeeze else out), cache


def lstm_backward(
    grad_out: np.ndarray, cache: LstmForwardCache, params: Dict[str, np.ndarray]
) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
    """Backpropagation through time; returns (d_inputs, {param name: grad})."""
    g = grad_out[None] if cache.squeeze else grad_out
    h_units = params["U"].shape[0]
    batch = g.shape[0]
    t_len = cache.t_len

    def expand(last_grad: np.ndarray) -> np.ndarray:
        full = np.zeros((batch, t_len, h_units), dtype=last_grad.dtype)
        full[:, -1] = last_grad
        return full

    if cache.return_sequences:
        d_fwd = g[..., :h_units]
        d_rev = g[..., h_units:][:, ::-1] if cache.backward is not None else None
    else:
        d_fwd = expand(g[:, :h_units])
        d_rev = expand(g[:, h_units:]) if cache.backward is not None else None

    d_x, d_w, d_u, d_b = _lstm_direction_backward(np.ascontiguousarray(d_fwd), cache.forward, params["W"], params["U"])
    grads = {"W": d_w, "U": d_u, "b": d_b}
    if cache.backward is not None:
        d_x_rev, d_w_r, d_u_r, d_b_r = _lstm_direction_backward(
            np.ascontiguousarray(d_rev), cache.backward, params["W_rev"], params["U_rev"]
        )
        d_x = d_x + d_x_rev[:, ::-1]
        grads.update({"W_rev": d_w_r, "U_rev": d_u_r, "b_rev": d_b_r})
    return (d_x[0] if cache.squeeze else d_x), grads
