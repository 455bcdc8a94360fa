import json
from pathlib import Path

import pandas as pd
import streamlit as st

from src.config.settings import OUT_DIR
from src.reports.figures import (
    confusion_figure,
    context_sweep_figure,
    size_histogram_figure,
    training_curves_figure,
)

st.set_page_config(page_title="Log Triage Dashboard", layout="wide")


@st.cache_data(ttl=300)
def load_csv(path: str) -> pd.DataFrame:
    p = Path(path)
    return pd.read_csv(p) if p.exists() else pd.DataFrame()


@st.cache_data(ttl=300)
def load_json(path: str) -> dict:
    p = Path(path)
    return json.loads(p.read_text(encoding="utf-8")) if p.exists() else {}


# --- Sidebar ---
st.sidebar.title("Run")
runs_root = Path(OUT_DIR)
run_dirs = sorted(p for p in runs_root.glob("*") if p.is_dir()) if runs_root.exists() else []
if not run_dirs:
    st.info(f"No runs found under {runs_root}. Run ./run_pipeline.sh first.")
    st.stop()
run_dir = st.sidebar.selectbox("Run directory", run_dirs, format_func=lambda p: p.name)

# --- Title ---
st.title("Log Triage Dashboard")
st.caption(f"Artifacts from {run_dir}")

# --- Headline metrics ---
metrics = load_json(str(run_dir / "metrics.json"))
if metrics:
    cols = st.columns(3)
    cols[0].metric("Test accuracy", f"{metrics['accuracy']:.2%}")
    cols[1].metric("Macro F1", f"{metrics['f1_macro']:.3f}")
    cols[2].metric("Micro F1", f"{metrics['f1_micro']:.3f}")
    per_class = pd.DataFrame(metrics["per_class"]).T
    st.dataframe(per_class, use_container_width=True)
else:
    st.info("No evaluation yet (metrics.json missing).")

st.divider()

# --- Log sizes ---
st.subheader("Log size before and after cleaning")
hist_raw = load_csv(str(run_dir / "hist_raw.csv"))
hist_clean = load_csv(str(run_dir / "hist_clean.csv"))
if hist_raw.empty and hist_clean.empty:
    st.info("No histograms yet (run preprocess).")
else:
    st.plotly_chart(size_histogram_figure(hist_raw, hist_clean), use_container_width=True)
    report = load_json(str(run_dir / "filter_report.json"))
    if report:
        st.caption(
            f"Tukey bounds {report['lower_bound']:.0f} .. {report['upper_bound']:.0f} chars; "
            f"kept {len(report['kept_ids'])}, dropped {len(report['dropped_ids'])}."
        )

st.divider()

# --- Training curves ---
st.subheader("Training curves")
history = load_csv(str(run_dir / "history.csv"))
if history.empty:
    st.info("No training history yet (run clf-train).")
else:
    metric = st.radio("Metric", ["loss", "accuracy", "f1_micro"], horizontal=True)
    st.plotly_chart(training_curves_figure(history, metric), use_container_width=True)

st.divider()

# --- Confusion matrix ---
st.subheader("Confusion matrix (test split)")
confusion = load_csv(str(run_dir / "confusion.csv"))
if confusion.empty:
    st.info("No confusion matrix yet.")
else:
    st.plotly_chart(confusion_figure(confusion.set_index(confusion.columns[0])), use_container_width=True)

# --- Context sweep ---
sweep = load_csv(str(run_dir / "context_sweep.csv"))
if not sweep.empty:
    st.divider()
    st.subheader("Accuracy versus context size")
    st.plotly_chart(context_sweep_figure(sweep), use_container_width=True)
    with st.expander("Sweep table"):
        st.dataframe(sweep, use_container_width=True)
