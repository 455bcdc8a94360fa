from typing import Dict, Iterator

import numpy as np

DTYPES = {"float32": np.float32, "float64": np.float64}


class TrainingDivergedError(RuntimeError):
    """Raised when the training loss stops being finite."""


def resolve_dtype(precision: str):
    try:
        return DTYPES[precision]
    except KeyError:
        raise ValueError(f"precision must be one of {sorted(DTYPES)}, got {precision!r}") from None


def minibatches(n: int, batch_size: int, rng: np.random.Generator) -> Iterator[np.ndarray]:
    """Shuffled index batches covering range(n) once; the last batch may be short."""
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def check_finite(loss: float, where: str) -> None:
    if not np.isfinite(loss):
        raise TrainingDivergedError(
            f"Loss became {loss} at {where}. Lower the learning rate or check the input data."
        )


def snapshot(params: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
    return {k: v.copy() for k, v in params.items()}


def restore(params: Dict[str, np.ndarray], saved: Dict[str, np.ndarray]) -> None:
    """Copy saved values into the live arrays (keeps layer references valid)."""
    for k, v in saved.items():
        if params[k].shape != v.shape:
            raise ValueError(f"Parameter {k} has shape {params[k].shape}, saved value {v.shape}")
        params[k][...] = v
