"""
Architecture sweeps over the residual CNN: accuracy versus context size
(max_len) and versus the number of Conv1D layers.
"""
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from src.corpus.records import LogRecord
from src.models.log_cnn import ArchConfig, build_model
from src.models.train_classifier import TrainConfig, evaluate, train
from src.run_log import log_event
from src.vocab.char_vocab import CharVocab

DEFAULT_CONTEXT_GRID = [1_000, 5_000, 10_000, 50_000, 80_000, 200_000]
DEFAULT_DEPTHS = [1, 2, 3, 4]
SWEEP_COLUMNS = ["accuracy", "f1_macro", "f1_micro", "best_epoch"]


def _fit_and_score(
    arch: ArchConfig,
    train_set: List[LogRecord],
    val_set: List[LogRecord],
    test_set: List[LogRecord],
    vocab: CharVocab,
    cfg: TrainConfig,
    init_embeddings: Optional[np.ndarray],
) -> dict:
    model = build_model(arch, vocab.size, init_embeddings=init_embeddings, seed=cfg.seed)
    ckpt, _ = train(model, train_set, val_set, cfg, vocab)
    metrics = evaluate(model, test_set, vocab)
    return {
        "accuracy": metrics.accuracy,
        "f1_macro": metrics.f1_macro,
        "f1_micro": metrics.f1_micro,
        "best_epoch": ckpt.metrics["best_epoch"],
    }


def sweep_context(
    train_set: List[LogRecord],
    val_set: List[LogRecord],
    test_set: List[LogRecord],
    vocab: CharVocab,
    arch: ArchConfig,
    cfg: TrainConfig,
    grid: Sequence[int] = DEFAULT_CONTEXT_GRID,
    init_embeddings: Optional[np.ndarray] = None,
    out_csv: Optional[Path] = None,
) -> pd.DataFrame:
    """Train and evaluate one model per max_len in grid, same seed for every run."""
    if not grid:
        raise ValueError("Context grid is empty.")
    rows = []
    for max_len in grid:
        log_event(f"Context sweep: max_len={max_len}")
        row = _fit_and_score(replace(arch, max_len=int(max_len)), train_set, val_set, test_set, vocab, cfg, init_embeddings)
        rows.append({"max_len": int(max_len), **row})
        log_event(f"✅ max_len={max_len}: accuracy {row['accuracy']:.4f}, macro-F1 {row['f1_macro']:.4f}")

    df = pd.DataFrame(rows, columns=["max_len"] + SWEEP_COLUMNS)
    if out_csv is not None:
        Path(out_csv).parent.mkdir(parents=True, exist_ok=True)
        df.to_csv(out_csv, index=False)
    return df


def depth_robustness(
    train_set: List[LogRecord],
    val_set: List[LogRecord],
    test_set: List[LogRecord],
    vocab: CharVocab,
    arch: ArchConfig,
    cfg: TrainConfig,
    depths: Sequence[int] = DEFAULT_DEPTHS,
    init_embeddings: Optional[np.ndarray] = None,
    out_csv: Optional[Path] = None,
) -> pd.DataFrame:
    """
    One run per conv-layer count; every layer repeats the first layer's
    (filters, kernel) of `arch`.
    """
    layer = arch.conv_layers[0]
    rows = []
    for depth in depths:
        if depth < 1:
            raise ValueError(f"Depth must be >= 1, got {depth}")
        log_event(f"Depth sweep: {depth} conv layer(s)")
        row = _fit_and_score(
            replace(arch, conv_layers=[layer] * int(depth)), train_set, val_set, test_set, vocab, cfg, init_embeddings
        )
        rows.append({"conv_layers": int(depth), **row})
    df = pd.DataFrame(rows, columns=["conv_layers"] + SWEEP_COLUMNS)
    if out_csv is not None:
        Path(out_csv).parent.mkdir(parents=True, exist_ok=True)
        df.to_csv(out_csv, index=False)
    return df
