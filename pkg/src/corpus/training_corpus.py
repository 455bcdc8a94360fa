from pathlib import Path
from typing import List

from src.corpus.records import LogRecord

RECORD_SEPARATOR = "\n"


def build_training_corpus(records: List[LogRecord]) -> str:
    """
    Concatenate cleaned, size-filtered logs into the training corpus (TC).

    Records are joined in id order with a single newline between them.
    """
    ordered = sorted(records, key=lambda r: r.id)
    return RECORD_SEPARATOR.join(r.text for r in ordered)


def write_training_corpus(corpus: str, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # newline="" keeps the bytes identical across platforms
    with path.open("w", encoding="utf-8", newline="") as f:
        f.write(corpus)
    return path


def read_training_corpus(path: Path) -> str:
    with Path(path).open("r", encoding="utf-8", newline="") as f:
        return f.read()
