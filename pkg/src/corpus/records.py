from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional

import pandas as pd
from joblib import Parallel, delayed

from src.run_log import log_event

CLASS_NAMES = ["Pass", "L0_L1", "L2", "L3"]
CLASS_INDEX = {name: i for i, name in enumerate(CLASS_NAMES)}
MANIFEST_COLUMNS = ["path", "label"]


class ManifestError(ValueError):
    """Raised when a dataset manifest row cannot be used."""


class CorpusError(ValueError):
    """Raised when a corpus operation gets unusable input (e.g. no logs)."""


@dataclass(frozen=True)
class LogRecord:
    """
    One software log.

    raw_text holds the bytes as found on disk (or the cleaned text, re-encoded,
    after preprocessing). char_count is the length of the UTF-8 decoded text,
    invalid bytes counting as one U+FFFD each.
    """

    id: str
    raw_text: bytes
    char_count: int
    label: Optional[str] = None
    source_path: str = ""

    @property
    def text(self) -> str:
        return decode_log_bytes(self.raw_text)

    @property
    def byte_size(self) -> int:
        return len(self.raw_text)

    @property
    def label_index(self) -> int:
        if self.label is None:
            raise CorpusError(f"Record {self.id} has no label.")
        return CLASS_INDEX[self.label]

    @classmethod
    def from_text(cls, id: str, text: str, label: Optional[str] = None, source_path: str = "") -> "LogRecord":
        return cls(id=id, raw_text=text.encode("utf-8"), char_count=len(text), label=label, source_path=source_path)

    def with_text(self, text: str) -> "LogRecord":
        return replace(self, raw_text=text.encode("utf-8"), char_count=len(text))


def decode_log_bytes(raw: bytes) -> str:
    return raw.decode("utf-8", errors="replace")


def read_manifest(manifest_path: Path) -> Dict[str, str]:
    """
    Load a "path,label" CSV manifest into {path: label}.

    Every row is validated; the first bad row raises ManifestError naming the
    row number (1-based, header excluded) and the offending value.
    """
    try:
        df = pd.read_csv(manifest_path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.ParserError as exc:
        raise ManifestError(f"Malformed manifest {manifest_path}: {exc}") from exc

    if list(df.columns) != MANIFEST_COLUMNS:
        raise ManifestError(
            f"Manifest {manifest_path} must have header 'path,label', got {','.join(df.columns)}"
        )

    labels: Dict[str, str] = {}
    for row_number, row in enumerate(df.itertuples(index=False), start=1):
        path = str(row.path).strip()
        label = str(row.label).strip()
        if not path:
            raise ManifestError(f"Manifest row {row_number}: empty path")
        if label not in CLASS_INDEX:
            raise ManifestError(
                f"Manifest row {row_number} ({path}): invalid label '{label}', "
                f"expected one of {', '.join(CLASS_NAMES)}"
            )
        labels[Path(path).as_posix()] = label
    return labels


def _read_one(path: Path, root: Path):
    record_id = path.relative_to(root).as_posix()
    try:
        raw = path.read_bytes()
    except OSError as exc:
        return record_id, None, str(exc)
    return record_id, raw, None


def scan_corpus(
    root_path: Path,
    manifest: Optional[Path] = None,
    n_jobs: int = 1,
    warnings: Optional[List[str]] = None,
) -> List[LogRecord]:
    """
    Read every file under root_path into a LogRecord, ordered by id.

    The id is the file path relative to root_path. When a manifest is given,
    labels are attached from it; files it does not mention stay unlabeled and
    manifest rows without a file are reported. Unreadable files are skipped and
    reported in `warnings` (if given) and the run log.
    """
    root = Path(root_path)
    if not root.is_dir():
        raise CorpusError(f"Log directory not found: {root}")

    labels = read_manifest(Path(manifest)) if manifest is not None else {}
    manifest_resolved = Path(manifest).resolve() if manifest is not None else None

    paths = sorted(
        p
        for p in root.rglob("*")
        if p.is_file()
        and not any(part.startswith(".") for part in p.relative_to(root).parts)
        and p.resolve() != manifest_resolved
        and p.name != "manifest.csv"
    )

    results = Parallel(n_jobs=n_jobs)(delayed(_read_one)(p, root) for p in paths)

    def warn(message: str) -> None:
        if warnings is not None:
            warnings.append(message)
        log_event(f"⚠️ {message}", echo=False)

    records: List[LogRecord] = []
    for path, (record_id, raw, error) in zip(paths, results):
        if raw is None:
            warn(f"Skipping unreadable file {record_id}: {error}")
            continue
        label = labels.get(record_id)
        if manifest is not None and label is None:
            warn(f"{record_id} is not listed in the manifest; left unlabeled")
        records.append(
            LogRecord(
                id=record_id,
                raw_text=raw,
                char_count=len(decode_log_bytes(raw)),
                label=label,
                source_path=str(path),
            )
        )

    seen = {r.id for r in records}
    for missing in sorted(set(labels) - seen):
        warn(f"Manifest lists {missing} but no such file was found")

    records.sort(key=lambda r: r.id)
    return records


def label_counts(records: List[LogRecord]) -> Dict[str, int]:
    counts = {name: 0 for name in CLASS_NAMES}
    for r in records:
        if r.label is not None:
            counts[r.label] += 1
    return counts
