"""
Sectioned run configuration.

An INI file with sections [corpus], [lm], [arch], [train], [synth], [embed]
and [run]; every key can be overridden with a "section.key" -> value pair
(the CLI passes --section.key=value flags through). Values are coerced to
the type of the matching dataclass field. The single global seed lives in
[run] and is copied into every section that needs one.
"""
import configparser
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union, get_args, get_origin, get_type_hints

from src.config import settings
from src.corpus.ppu import PpuConfig
from src.corpus.size_filter import HARD_CAP_BYTES
from src.models.lm_seq2seq import LmConfig
from src.models.log_cnn import ArchConfig
from src.models.train_classifier import TrainConfig
from src.synth.synlog import SynConfig

TRUE_WORDS = {"1", "true", "yes", "on"}
FALSE_WORDS = {"0", "false", "no", "off"}


class ConfigError(ValueError):
    """Raised for unknown sections/keys and values that cannot be coerced."""


@dataclass
class CorpusSection:
    max_word_len: int = 40
    max_line_len: int = 400
    strip_numbers: bool = True
    category_patterns: List[str] = field(default_factory=list)
    hard_cap_bytes: int = HARD_CAP_BYTES
    hist_bins: int = 50

    def ppu(self) -> PpuConfig:
        return PpuConfig(
            max_word_len=self.max_word_len,
            max_line_len=self.max_line_len,
            strip_numbers=self.strip_numbers,
            category_patterns=list(self.category_patterns),
        )


@dataclass
class EmbedSection:
    provider: str = "mock"
    endpoint: str = ""
    auth_token: str = ""
    timeout: float = 30.0
    dim: int = 64
    context: int = 512
    overlap_w: Optional[int] = None
    pooling: str = "mask"
    context_capacity: int = 4096
    max_in_flight: int = 4
    head_epochs: int = 200
    head_lr: float = 1e-2

    def __post_init__(self) -> None:
        if self.provider not in ("mock", "http"):
            raise ValueError(f"provider must be 'mock' or 'http', got {self.provider!r}")
        if self.pooling not in ("mask", "literal"):
            raise ValueError(f"pooling must be 'mask' or 'literal', got {self.pooling!r}")


@dataclass
class RunSection:
    seed: int = 0
    out_dir: str = settings.OUT_DIR
    n_jobs: int = settings.N_JOBS


SECTIONS = {
    "corpus": CorpusSection,
    "lm": LmConfig,
    "arch": ArchConfig,
    "train": TrainConfig,
    "synth": SynConfig,
    "embed": EmbedSection,
    "run": RunSection,
}
SEEDED_SECTIONS = ("lm", "train", "synth")


@dataclass
class RunConfig:
    corpus: CorpusSection = field(default_factory=CorpusSection)
    lm: LmConfig = field(default_factory=LmConfig)
    arch: ArchConfig = field(default_factory=ArchConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    synth: SynConfig = field(default_factory=SynConfig)
    embed: EmbedSection = field(default_factory=EmbedSection)
    run: RunSection = field(default_factory=RunSection)

    @property
    def seed(self) -> int:
        return self.run.seed

    @property
    def out_dir(self) -> Path:
        return Path(self.run.out_dir)

    def to_dict(self) -> Dict[str, Dict[str, Any]]:
        out = {}
        for name in SECTIONS:
            section = getattr(self, name)
            out[name] = section.to_dict() if hasattr(section, "to_dict") else asdict(section)
        return out

    def write_json(self, path: Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True), encoding="utf-8")


def _coerce(key: str, raw: str, hint: Any) -> Any:
    origin = get_origin(hint)
    args = get_args(hint)
    text = raw.strip()

    if origin is Union and type(None) in args:
        if text.lower() in ("", "none"):
            return None
        inner = next(a for a in args if a is not type(None))
        return _coerce(key, raw, inner)
    if hint is bool:
        if text.lower() in TRUE_WORDS:
            return True
        if text.lower() in FALSE_WORDS:
            return False
        raise ConfigError(f"Invalid value for '{key}': {raw!r} is not a boolean")
    try:
        if hint is int:
            return int(text.replace("_", ""))
        if hint is float:
            return float(text)
        if hint is str:
            return text
        if origin in (list, List):
            items = [item.strip() for item in text.split(",") if item.strip()]
            inner = args[0] if args else str
            if get_origin(inner) is tuple:
                # conv layers as "FILTERSxKERNEL"
                return [tuple(int(v) for v in item.lower().split("x")) for item in items]
            return [_coerce(key, item, inner) for item in items]
        if origin is tuple:
            return tuple(int(v) for v in text.split(","))
        if origin is dict:
            out = {}
            for item in text.split(","):
                name, value = item.split(":")
                out[name.strip()] = float(value)
            return out
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"Invalid value for '{key}': {raw!r} ({exc})") from exc
    raise ConfigError(f"Config key '{key}' has an unsupported type {hint}")


def _normalize_key(key: str) -> str:
    return key.strip().lower().replace("-", "_")


def _collect_raw(path: Optional[Path], overrides: Mapping[str, str]) -> Dict[str, Dict[str, str]]:
    raw: Dict[str, Dict[str, str]] = {name: {} for name in SECTIONS}

    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"Config file not found: {path}")
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"Malformed config file {path}: {exc}") from exc
        for section in parser.sections():
            if section not in SECTIONS:
                raise ConfigError(f"Unknown config section '[{section}]' in {path}")
            for key, value in parser.items(section):
                raw[section][_normalize_key(key)] = value

    for dotted, value in overrides.items():
        if "." not in dotted:
            raise ConfigError(f"Config override '{dotted}' must look like section.key")
        section, key = dotted.split(".", 1)
        section = section.strip().lower()
        if section not in SECTIONS:
            raise ConfigError(f"Unknown config section '{section}' in override '{dotted}'")
        raw[section][_normalize_key(key)] = str(value)
    return raw


def _build_section(name: str, values: Dict[str, str], seed: Optional[int]) -> Any:
    cls = SECTIONS[name]
    hints = get_type_hints(cls)
    known = {f.name for f in fields(cls) if f.init}
    kwargs: Dict[str, Any] = {}
    for key, raw in values.items():
        qualified = f"{name}.{key}"
        if key not in known:
            raise ConfigError(f"Unknown config key '{qualified}'")
        if key == "seed" and name != "run":
            raise ConfigError(f"Config key '{qualified}' is not settable; use run.seed")
        kwargs[key] = _coerce(qualified, raw, hints[key])
    if seed is not None and "seed" in known:
        kwargs["seed"] = seed
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{name}] {exc}") from exc


def load_run_config(path: Optional[Path] = None, overrides: Optional[Mapping[str, str]] = None) -> RunConfig:
    raw = _collect_raw(path, overrides or {})
    run = _build_section("run", raw["run"], None)
    built = {name: _build_section(name, raw[name], run.seed if name in SEEDED_SECTIONS else None) for name in SECTIONS if name != "run"}
    return RunConfig(run=run, **built)


def parse_override_args(args: List[str]) -> Dict[str, str]:
    """["--arch.max-len=500", "--train.lr", "1e-3"] -> {"arch.max-len": "500", "train.lr": "1e-3"}"""
    out: Dict[str, str] = {}
    i = 0
    while i < len(args):
        arg = args[i]
        if not arg.startswith("--") or "." not in arg.split("=", 1)[0]:
            raise ConfigError(f"Unrecognised argument '{arg}'")
        if "=" in arg:
            key, value = arg[2:].split("=", 1)
        elif i + 1 < len(args) and not args[i + 1].startswith("--"):
            key, value = arg[2:], args[i + 1]
            i += 1
        else:
            key, value = arg[2:], "true"
        out[key] = value
        i += 1
    return out

