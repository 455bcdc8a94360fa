from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional

import numpy as np

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class AdamState:
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS


def adam_step(
    params: Dict[str, np.ndarray],
    grads: Dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    l2: float = 0.0,
    regularized: Optional[Iterable[str]] = None,
) -> AdamState:
    """
    One bias-corrected Adam update, applied to the param arrays in place.

    L2 is classic L2-in-loss: 2 * l2 * param is added to the gradient of every
    name in `regularized` before the moment updates (not decoupled decay).
    Parameters are visited in sorted-name order.
    """
    reg = set(regularized or ())
    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    for name in sorted(params):
        p = params[name]
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"Gradient for {name} has shape {g.shape}, param has {p.shape}")
        if l2 and name in reg:
            g = g + 2.0 * l2 * p
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / bc1
        v_hat = v / bc2
        p -= (lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(p.dtype, copy=False)
    return state


class Adam:
    """Thin optimizer object holding AdamState for one model."""

    def __init__(self, lr: float = 1e-4, l2: float = 0.0) -> None:
        self.lr = lr
        self.l2 = l2
        self.state = AdamState()

    def step(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray], regularized: Iterable[str] = ()) -> None:
        adam_step(params, grads, self.state, self.lr, self.l2, regularized)
