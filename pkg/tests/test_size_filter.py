import math

import numpy as np
import pytest

from src.corpus.records import CorpusError, LogRecord
from src.corpus.size_filter import apply_size_filter, histogram_frame, size_histogram, tukey_filter


def _records(sizes, raw_sizes=None):
    out = []
    for i, n in enumerate(sizes):
        out.append(LogRecord(id=f"r{i:04d}", raw_text=b"x" * (raw_sizes[i] if raw_sizes else n), char_count=n))
    return out


def _quantile_oracle(values, p):
    xs = sorted(values)
    h = (len(xs) - 1) * p
    lo = math.floor(h)
    hi = min(lo + 1, len(xs) - 1)
    return xs[lo] + (h - lo) * (xs[hi] - xs[lo])


def test_simple_fences():
    report = tukey_filter(_records([10, 12, 11, 13, 1000]))
    assert report.q1 == 11
    assert report.q3 == 13
    assert report.lower_bound == 8
    assert report.upper_bound == 16
    assert report.dropped_ids == ["r0004"]


def _list_lengths(rng, cases, longest=10_000):
    """Log-uniform lengths in [1, longest], always including both ends."""
    lengths = np.exp(rng.uniform(0.0, np.log(longest), size=cases)).astype(int)
    lengths[:2] = [1, longest]
    return np.clip(lengths, 1, longest)


def test_matches_interpolated_quantile_oracle():
    rng = np.random.default_rng(0)
    for length in _list_lengths(rng, 1000):
        sizes = rng.integers(0, 300_000, size=int(length)).tolist()
        report = tukey_filter(_records(sizes, raw_sizes=[1] * len(sizes)))
        q1 = _quantile_oracle(sizes, 0.25)
        q3 = _quantile_oracle(sizes, 0.75)
        lower = q1 - 1.5 * (q3 - q1)
        upper = q3 + 1.5 * (q3 - q1)
        assert report.lower_bound == lower
        assert report.upper_bound == upper
        expected = [f"r{i:04d}" for i, n in enumerate(sizes) if lower <= n <= upper]
        assert report.kept_ids == expected


def test_all_equal_sizes_keep_everything():
    report = tukey_filter(_records([7] * 9))
    assert report.iqr == 0
    assert len(report.kept_ids) == 9


def test_hard_cap_drops_large_files():
    records = _records([100, 100, 100, 100], raw_sizes=[100, 100, 100, 300_001])
    report = tukey_filter(records, hard_cap_bytes=300_000)
    assert report.dropped_ids == ["r0003"]
    assert [r.id for r in apply_size_filter(records, report)] == ["r0000", "r0001", "r0002"]


def test_empty_input_raises():
    with pytest.raises(CorpusError):
        tukey_filter([])


def test_histogram_counts_everything():
    records = _records([0, 1, 2, 3, 4, 5, 6, 7, 8, 10])
    bins = size_histogram(records, 5)
    assert len(bins) == 5
    assert bins[0][0] == 0 and bins[-1][1] == 10
    assert sum(b[2] for b in bins) == 10
    frame = histogram_frame(records, 5)
    assert list(frame.columns) == ["bin_lo", "bin_hi", "count"]


def test_report_json(tmp_path):
    report = tukey_filter(_records([1, 2, 3]))
    report.write_json(tmp_path / "report.json")
    assert "upper_bound" in (tmp_path / "report.json").read_text(encoding="utf-8")
