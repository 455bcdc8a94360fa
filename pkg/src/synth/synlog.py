"""
Labeled synthetic test-equipment logs.

A log is a run of "C:" (confirmation) and "I:" (indication) blocks with
randomised parameters. Defect logs carry a class-specific multi-line
signature block with probability signature_strength; Pass logs never do.
Signature lines avoid standalone numbers and long words so they survive
preprocessing unchanged.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from src.config.seeding import indexed_rng, module_rng
from src.corpus.records import CLASS_INDEX, CLASS_NAMES, MANIFEST_COLUMNS

MANIFEST_NAME = "manifest.csv"

COMMANDS = [
    "CELL_CONFIG_REQ",
    "UE_ATTACH_REQ",
    "RRC_SETUP_REQ",
    "PDCP_CONFIG_REQ",
    "MAC_SCHED_REQ",
    "PHY_CONFIG_REQ",
    "NAS_REGISTER_REQ",
    "RLC_CONFIG_REQ",
    "HANDOVER_REQ",
    "BEARER_SETUP_REQ",
]
INDICATIONS = [
    "DL_DATA_IND",
    "UL_GRANT_IND",
    "HARQ_ACK_IND",
    "CQI_REPORT_IND",
    "RACH_IND",
    "PAGING_IND",
    "SYS_INFO_IND",
    "TIMING_ADV_IND",
    "MEAS_REPORT_IND",
]
PARAMS = ["ue_id", "cell_id", "rnti", "harq_pid", "mcs", "prb_count", "tx_power", "earfcn", "bearer_id", "sfn"]
STATUS_WORDS = ["status=OK", "status=DONE", "result=SUCCESS", "state=ACTIVE"]

SIGNATURES: Dict[str, str] = {
    "L0_L1": (
        "I: PHY_SYNC_LOSS_IND\n"
        "    reason=RADIO_LINK_FAILURE cause=OUT_OF_SYNC\n"
        "    action=PHY_RESYNC_ATTEMPT result=FAILED"
    ),
    "L2": (
        "I: RLC_MAX_RETX_IND\n"
        "    entity=RLC_AM reason=MAX_RETX_REACHED\n"
        "    action=PDCP_REESTABLISH result=FAILED"
    ),
    "L3": (
        "C: NAS_SERVICE_REQ status=REJECTED\n"
        "    cause=PDN_CONNECTIVITY_REJECT layer=NETWORK\n"
        "    action=DETACH_REQUEST result=FAILED"
    ),
}


def default_class_probs() -> Dict[str, float]:
    return {"Pass": 0.62, "L0_L1": 0.21, "L2": 0.12, "L3": 0.05}


@dataclass
class SynConfig:
    n_samples: int = 3262
    class_probs: Dict[str, float] = field(default_factory=default_class_probs)
    mean_blocks_per_log: int = 20
    block_len_range: Tuple[int, int] = (60, 240)
    signature_strength: float = 0.9
    seed: int = 0

    def __post_init__(self) -> None:
        self.block_len_range = tuple(int(v) for v in self.block_len_range)
        unknown = set(self.class_probs) - set(CLASS_NAMES)
        if unknown:
            raise ValueError(f"Unknown class(es) in class_probs: {', '.join(sorted(unknown))}")
        if any(p < 0 for p in self.class_probs.values()):
            raise ValueError("class_probs must be non-negative")
        if not np.isclose(sum(self.class_probs.values()), 1.0):
            raise ValueError(f"class_probs must sum to 1, got {sum(self.class_probs.values()):.6f}")
        if self.n_samples < 1 or self.mean_blocks_per_log < 1:
            raise ValueError("n_samples and mean_blocks_per_log must be >= 1")
        lo, hi = self.block_len_range
        if not 0 < lo <= hi:
            raise ValueError(f"block_len_range must satisfy 0 < min <= max, got {self.block_len_range}")
        if not 0.0 < self.signature_strength <= 1.0:
            raise ValueError(f"signature_strength must be in (0, 1], got {self.signature_strength}")

    def prob_vector(self) -> np.ndarray:
        return np.array([self.class_probs.get(name, 0.0) for name in CLASS_NAMES], dtype=np.float64)


def _detail_line(rng: np.random.Generator) -> str:
    kind = rng.integers(0, 3)
    if kind == 0:
        # bare counters, removed by preprocessing
        return "    " + " ".join(str(int(v)) for v in rng.integers(0, 100_000, size=rng.integers(1, 4)))
    names = rng.choice(PARAMS, size=rng.integers(1, 4), replace=False)
    pairs = " ".join(f"{name}={int(rng.integers(0, 4096))}" for name in names)
    return f"    {pairs} {STATUS_WORDS[int(rng.integers(0, len(STATUS_WORDS)))]}"


def _block(rng: np.random.Generator, target_len: int) -> str:
    if rng.random() < 0.5:
        head = f"C: {COMMANDS[int(rng.integers(0, len(COMMANDS)))]}"
    else:
        head = f"I: {INDICATIONS[int(rng.integers(0, len(INDICATIONS)))]}"
    lines = [head]
    length = len(head)
    while length < target_len:
        line = _detail_line(rng)
        lines.append(line)
        length += len(line) + 1
    return "\n".join(lines)


def generate_log(label: str, rng: np.random.Generator, cfg: Optional[SynConfig] = None) -> str:
    """
    One log for `label`. The signature (if injected) goes in at a uniformly
    random block position.
    """
    if label not in CLASS_INDEX:
        raise ValueError(f"Unknown label {label!r}, expected one of {', '.join(CLASS_NAMES)}")
    cfg = cfg or SynConfig()
    lo, hi = cfg.block_len_range

    n_blocks = max(1, int(rng.poisson(cfg.mean_blocks_per_log)))
    blocks = [_block(rng, int(rng.integers(lo, hi + 1))) for _ in range(n_blocks)]

    if label != "Pass" and rng.random() < cfg.signature_strength:
        blocks.insert(int(rng.integers(0, n_blocks + 1)), SIGNATURES[label])
    return "\n".join(blocks) + "\n"


def has_signature(text: str, label: str) -> bool:
    return label in SIGNATURES and SIGNATURES[label] in text


def _write_one(index: int, label: str, cfg: SynConfig, out_dir: Path) -> str:
    name = f"log_{index:05d}.log"
    text = generate_log(label, indexed_rng(cfg.seed, index), cfg)
    (out_dir / name).write_text(text, encoding="utf-8", newline="\n")
    return name


def draw_labels(cfg: SynConfig) -> List[str]:
    rng = module_rng(cfg.seed, "synth.labels")
    picks = rng.choice(len(CLASS_NAMES), size=cfg.n_samples, p=cfg.prob_vector())
    return [CLASS_NAMES[int(i)] for i in picks]


def generate_dataset(cfg: SynConfig, out_dir: Path, n_jobs: int = 1) -> Tuple[List[Path], pd.DataFrame]:
    """
    Write cfg.n_samples logs plus manifest.csv ("path,label") into out_dir.

    Labels come from one multinomial draw; every file has its own generator
    derived from (seed, index), so output does not depend on n_jobs.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    labels = draw_labels(cfg)

    names = Parallel(n_jobs=n_jobs)(
        delayed(_write_one)(i, label, cfg, out_dir) for i, label in enumerate(labels)
    )
    manifest = pd.DataFrame({"path": names, "label": labels}, columns=MANIFEST_COLUMNS)
    manifest.to_csv(out_dir / MANIFEST_NAME, index=False)
    return [out_dir / n for n in names], manifest
