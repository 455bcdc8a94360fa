from functools import lru_cache
from typing import Dict

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from src.config.settings import get_model_path
from src.corpus.ppu import PpuConfig, preprocess_log
from src.corpus.records import CLASS_NAMES
from src.models.checkpoint import ModelCheckpoint
from src.models.log_cnn import ResidualCNN
from src.models.train_classifier import predict_proba
from src.vocab.char_vocab import encode

app = FastAPI(
    title="Log Triage API",
    description="Classifies test-equipment logs into Pass / L0_L1 / L2 / L3 with a trained residual CNN.",
    version="0.1.0",
)


class LogIn(BaseModel):
    text: str


@lru_cache(maxsize=4)
def load_classifier(path: str):
    """Load (and memoise) the checkpoint served by /predict, with the cleaning rules it was trained behind."""
    ckpt = ModelCheckpoint.load(path, expected_kind="classifier")
    return ResidualCNN.from_checkpoint(ckpt), ckpt.vocab, PpuConfig.from_meta(ckpt.meta)


@app.get("/health")
def health_check():
    """
    Simple health check endpoint.
    """
    return {"status": "ok"}


@app.post("/predict")
def predict_log(body: LogIn) -> Dict[str, object]:
    """
    Classify one raw log, cleaned with the checkpoint's PPU rules first (as
    clf-predict does). Probabilities are keyed by class name; the predicted
    class is the most probable one (ties go to the lowest class index).
    """
    path = get_model_path()
    try:
        model, vocab, ppu = load_classifier(path)
    except FileNotFoundError:
        raise HTTPException(status_code=503, detail=f"No classifier checkpoint at {path}")

    text = preprocess_log(body.text, ppu)
    ids = encode(text, vocab, model.arch.max_len, model.arch.truncation)[None]
    probs = predict_proba(model, ids)[0]
    names = CLASS_NAMES[: model.arch.n_classes]
    return {
        "class": names[int(np.argmax(probs))],
        "probabilities": {name: float(p) for name, p in zip(names, probs)},
    }
