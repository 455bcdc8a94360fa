import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Tuple

import numpy as np
import pandas as pd

from src.corpus.records import CorpusError, LogRecord

HARD_CAP_BYTES = 300_000  # 300 kB, decimal


@dataclass
class SizeFilterReport:
    q1: float
    q3: float
    iqr: float
    lower_bound: float
    upper_bound: float
    hard_cap_bytes: int
    kept_ids: List[str] = field(default_factory=list)
    dropped_ids: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def write_json(self, path: Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")


def tukey_filter(records: List[LogRecord], hard_cap_bytes: int = HARD_CAP_BYTES) -> SizeFilterReport:
    """
    Drop size outliers with Tukey's fences on character counts.

    Quartiles use linear interpolation between order statistics (pandas'
    default, the "type 7" estimator). A record is kept iff
    Q1 - 1.5*IQR <= char_count <= Q3 + 1.5*IQR and its byte size does not
    exceed hard_cap_bytes.
    """
    if not records:
        raise CorpusError("tukey_filter needs at least one record.")

    sizes = pd.Series([r.char_count for r in records], dtype="float64")
    q1 = float(sizes.quantile(0.25))
    q3 = float(sizes.quantile(0.75))
    iqr = q3 - q1
    lower = q1 - 1.5 * iqr
    upper = q3 + 1.5 * iqr

    kept, dropped = [], []
    for r in records:
        if lower <= r.char_count <= upper and r.byte_size <= hard_cap_bytes:
            kept.append(r.id)
        else:
            dropped.append(r.id)

    return SizeFilterReport(
        q1=q1,
        q3=q3,
        iqr=iqr,
        lower_bound=lower,
        upper_bound=upper,
        hard_cap_bytes=hard_cap_bytes,
        kept_ids=kept,
        dropped_ids=dropped,
    )


def apply_size_filter(records: List[LogRecord], report: SizeFilterReport) -> List[LogRecord]:
    keep = set(report.kept_ids)
    return [r for r in records if r.id in keep]


def size_histogram(records: List[LogRecord], n_bins: int) -> List[Tuple[float, float, int]]:
    """Even-width character-count histogram over [min, max]."""
    if n_bins < 1:
        raise ValueError(f"n_bins must be >= 1, got {n_bins}")
    if not records:
        raise CorpusError("size_histogram needs at least one record.")

    sizes = np.array([r.char_count for r in records], dtype=np.float64)
    counts, edges = np.histogram(sizes, bins=n_bins, range=(sizes.min(), sizes.max()))
    return [(float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(n_bins)]


def histogram_frame(records: List[LogRecord], n_bins: int) -> pd.DataFrame:
    return pd.DataFrame(size_histogram(records, n_bins), columns=["bin_lo", "bin_hi", "count"])
