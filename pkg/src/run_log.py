from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

# Log file paths
BASE_DIR = Path(__file__).resolve().parents[1]  # project root
LOGS_DIR = BASE_DIR / "logs"
LOG_FILE_NAME = "pipeline.log"

_log_dir: Optional[Path] = None


def set_log_dir(path: Optional[Path]) -> None:
    """
    Point log_event at <path>/pipeline.log. Passing None restores the default
    project-level logs/ directory.
    """
    global _log_dir
    _log_dir = Path(path) if path is not None else None


def get_log_path() -> Path:
    return (_log_dir or LOGS_DIR) / LOG_FILE_NAME


def log_event(message: str, echo: bool = True) -> None:
    """
    Append a timestamped message to the run's pipeline.log and print it.

    This is a very lightweight logging helper; status prefixes (✅ ⚠️ ❌) are
    part of the message itself.
    """
    if echo:
        print(message)
    path = get_log_path()
    path.parent.mkdir(parents=True, exist_ok=True)
    timestamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    line = f"[{timestamp[:19]} UTC] {message}\n"
    with path.open("a", encoding="utf-8") as f:
        f.write(line)
