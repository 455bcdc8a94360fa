"""
Pre-processing unit (PPU): rule-based cleaning of raw logs.

Removes information unrelated to defect detection: over-long words, over-long
lines and standalone numbers. Category selection decides which logs are kept
at all.
"""
import re
from dataclasses import asdict, dataclass, field
from typing import List, Optional

from joblib import Parallel, delayed

from src.corpus.records import LogRecord

NUMBER_TOKEN = re.compile(r"[+-]?\d+")
LEADING_WS = re.compile(r"^\s*")


@dataclass(frozen=True)
class PpuConfig:
    max_word_len: int = 40
    max_line_len: int = 400
    strip_numbers: bool = True
    category_patterns: List[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.max_word_len < 1:
            raise ValueError(f"max_word_len must be >= 1, got {self.max_word_len}")
        if self.max_line_len < self.max_word_len:
            raise ValueError(
                f"max_line_len ({self.max_line_len}) must be >= max_word_len ({self.max_word_len})"
            )
        for pattern in self.category_patterns:
            try:
                re.compile(pattern)
            except re.error as exc:
                raise ValueError(f"Invalid category pattern {pattern!r}: {exc}") from exc

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_meta(cls, meta: dict, fallback: Optional["PpuConfig"] = None) -> "PpuConfig":
        """Cleaning rules stored with a checkpoint; fallback (or the defaults) when none were stored."""
        if "ppu" in meta:
            return cls(**meta["ppu"])
        return fallback if fallback is not None else cls()


def _keep_token(token: str, cfg: PpuConfig) -> bool:
    if len(token) > cfg.max_word_len:
        return False
    if cfg.strip_numbers and NUMBER_TOKEN.fullmatch(token):
        return False
    return True


def preprocess_log(raw_text: str, cfg: PpuConfig) -> str:
    """
    Clean one log.

    Lines longer than max_line_len are dropped whole. Within the remaining
    lines, whitespace-delimited tokens that are too long or (optionally)
    standalone integers are removed; the surviving tokens are re-joined with
    single spaces after the line's original indentation. A line whose every
    token was removed disappears. The result is a fixed point: cleaning it
    again changes nothing.
    """
    if not raw_text:
        return ""

    out_lines = []
    for line in raw_text.split("\n"):
        if len(line) > cfg.max_line_len:
            continue
        tokens = line.split()
        if not tokens:
            out_lines.append(line)
            continue
        kept = [t for t in tokens if _keep_token(t, cfg)]
        if not kept:
            continue
        indent = LEADING_WS.match(line).group()
        out_lines.append(indent + " ".join(kept))
    return "\n".join(out_lines)


def matches_categories(text: str, cfg: PpuConfig) -> bool:
    """Keep-all when no patterns are configured."""
    if not cfg.category_patterns:
        return True
    return any(re.search(p, text, flags=re.MULTILINE) for p in cfg.category_patterns)


def _clean_one(record: LogRecord, cfg: PpuConfig):
    text = record.text
    if not matches_categories(text, cfg):
        return None
    return record.with_text(preprocess_log(text, cfg))


def clean_records(records: List[LogRecord], cfg: PpuConfig, n_jobs: int = 1) -> List[LogRecord]:
    """
    Apply category selection and preprocess_log to every record.

    Records are processed in parallel and returned in id order.
    """
    cleaned = Parallel(n_jobs=n_jobs)(delayed(_clean_one)(r, cfg) for r in records)
    kept = [r for r in cleaned if r is not None]
    kept.sort(key=lambda r: r.id)
    return kept
