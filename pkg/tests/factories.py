from typing import List

from src.config.seeding import indexed_rng
from src.corpus.ppu import PpuConfig, preprocess_log
from src.corpus.records import CLASS_NAMES, LogRecord
from src.synth.synlog import SynConfig, generate_log


def make_small_records(per_class: int = 16, seed: int = 0) -> List[LogRecord]:
    """Short, cleaned, labeled synthetic logs; every defect log carries its signature."""
    cfg = SynConfig(mean_blocks_per_log=3, block_len_range=(60, 120), signature_strength=1.0, seed=seed)
    ppu = PpuConfig()
    records = []
    for c, label in enumerate(CLASS_NAMES):
        for i in range(per_class):
            index = c * per_class + i
            text = preprocess_log(generate_log(label, indexed_rng(seed, index), cfg), ppu)
            records.append(LogRecord.from_text(f"log_{index:05d}.log", text, label))
    return records
