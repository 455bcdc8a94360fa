import os
from dotenv import load_dotenv

# Always run commands from the project root so this finds .env there.
# e.g.:
#   cd ~/log-triage
#   python -m src.cli preprocess --in data/raw --out runs/demo

load_dotenv()  # Loads variables from .env into the environment

CACHE_DIR = os.getenv("LOGTRIAGE_CACHE_DIR", ".cache/embeddings")
OUT_DIR = os.getenv("LOGTRIAGE_OUT_DIR", "runs")
MODEL_PATH = os.getenv("LOGTRIAGE_MODEL_PATH", "runs/latest/classifier.ckpt")
N_JOBS = int(os.getenv("LOGTRIAGE_N_JOBS", "1"))


def get_cache_dir() -> str:
    """Embedding cache directory; re-read so tests and the CLI can override it."""
    return os.getenv("LOGTRIAGE_CACHE_DIR", CACHE_DIR)


def get_model_path() -> str:
    return os.getenv("LOGTRIAGE_MODEL_PATH", MODEL_PATH)


def print_settings_summary() -> None:
    """Helper to quickly see which directories and model the run points at."""
    print("Log triage settings:")
    print(f"  LOGTRIAGE_CACHE_DIR  = {get_cache_dir()}")
    print(f"  LOGTRIAGE_OUT_DIR    = {OUT_DIR}")
    print(f"  LOGTRIAGE_MODEL_PATH = {get_model_path()}")
    print(f"  LOGTRIAGE_N_JOBS     = {N_JOBS}")
