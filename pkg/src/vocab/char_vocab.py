import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

PAD_ID = 0
UNK_ID = 1
RESERVED_TOKENS = ("<pad>", "<unk>")
UNK_CHAR = "\ufffd"
TRUNCATION_MODES = ("head", "tail")


class VocabError(ValueError):
    """Raised for empty corpora, out-of-range ids or bad vocabulary files."""


def _codepoints(text: str) -> np.ndarray:
    return np.frombuffer(text.encode("utf-32-le", errors="surrogatepass"), dtype="<u4")


@dataclass(frozen=True)
class CharVocab:
    """
    Character <-> id bijection.

    Ids 0 and 1 are the reserved pad and unknown ids; corpus characters follow
    in ascending code-point order, so the corpus character count is size - 2.
    Immutable once built.
    """

    chars: Tuple[str, ...]
    pad_id: int = PAD_ID
    unk_id: int = UNK_ID
    _sorted_codepoints: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        cps = np.array([ord(c) for c in self.chars], dtype=np.uint32)
        if len(cps) > 1 and np.any(np.diff(cps.astype(np.int64)) <= 0):
            raise VocabError("Vocabulary characters must be unique and in ascending code-point order.")
        object.__setattr__(self, "_sorted_codepoints", cps)

    @property
    def size(self) -> int:
        return len(self.chars) + len(RESERVED_TOKENS)

    @property
    def char_to_id(self) -> Dict[str, int]:
        return {c: i + len(RESERVED_TOKENS) for i, c in enumerate(self.chars)}

    @property
    def id_to_char(self) -> Dict[int, str]:
        return {i + len(RESERVED_TOKENS): c for i, c in enumerate(self.chars)}

    def tokens(self) -> List[str]:
        """All entries in id order, reserved markers first (the vocabulary file layout)."""
        return list(RESERVED_TOKENS) + list(self.chars)

    @property
    def vocab_hash(self) -> str:
        payload = json.dumps(self.tokens(), ensure_ascii=False).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()

    def lookup(self, text: str) -> np.ndarray:
        """Map every character of text to its id (unknowns -> unk_id), no padding."""
        cps = _codepoints(text)
        if len(self._sorted_codepoints) == 0:
            return np.full(len(cps), UNK_ID, dtype=np.int32)
        idx = np.searchsorted(self._sorted_codepoints, cps)
        clipped = np.minimum(idx, len(self._sorted_codepoints) - 1)
        known = self._sorted_codepoints[clipped] == cps
        return np.where(known, clipped + len(RESERVED_TOKENS), UNK_ID).astype(np.int32)


def build_vocab(corpus: str) -> CharVocab:
    if not corpus:
        raise VocabError("Cannot build a vocabulary from an empty corpus.")
    return CharVocab(chars=tuple(sorted(set(corpus))))


def encode(text: str, vocab: CharVocab, max_len: int, truncation: str = "head") -> np.ndarray:
    """
    Fixed-length id sequence.

    Longer texts keep the first max_len characters ("head") or the last
    ("tail"); shorter texts are padded at the end with pad_id.
    """
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    if truncation not in TRUNCATION_MODES:
        raise ValueError(f"truncation must be one of {TRUNCATION_MODES}, got {truncation!r}")

    if len(text) > max_len:
        text = text[:max_len] if truncation == "head" else text[-max_len:]
    out = np.full(max_len, vocab.pad_id, dtype=np.int32)
    ids = vocab.lookup(text)
    out[: len(ids)] = ids
    return out


def encode_batch(texts: Iterable[str], vocab: CharVocab, max_len: int, truncation: str = "head") -> np.ndarray:
    rows = [encode(t, vocab, max_len, truncation) for t in texts]
    if not rows:
        return np.zeros((0, max_len), dtype=np.int32)
    return np.stack(rows)


def decode(ids: Sequence[int], vocab: CharVocab) -> str:
    arr = np.asarray(ids, dtype=np.int64).ravel()
    if arr.size and (arr.min() < 0 or arr.max() >= vocab.size):
        bad = int(arr[(arr < 0) | (arr >= vocab.size)][0])
        raise VocabError(f"Id {bad} outside vocabulary of size {vocab.size}")
    table = [""] + [UNK_CHAR] + list(vocab.chars)
    return "".join(table[i] for i in arr.tolist())


def save_vocab(vocab: CharVocab, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(vocab.tokens(), ensure_ascii=False, indent=0), encoding="utf-8")
    return path


def vocab_from_tokens(tokens: Sequence[str]) -> CharVocab:
    if list(tokens[: len(RESERVED_TOKENS)]) != list(RESERVED_TOKENS):
        raise VocabError(f"Vocabulary must start with reserved entries {RESERVED_TOKENS}")
    return CharVocab(chars=tuple(tokens[len(RESERVED_TOKENS):]))


def load_vocab(path: Path) -> CharVocab:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Vocabulary file not found at: {path}")
    return vocab_from_tokens(json.loads(path.read_text(encoding="utf-8")))
