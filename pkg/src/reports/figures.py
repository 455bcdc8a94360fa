"""Plotly figure builders for the run dashboard. Each takes a pandas frame as written by the CLI."""
import pandas as pd
import plotly.graph_objects as go

TRAINING_CURVES = [("loss", "val_loss"), ("accuracy", "val_accuracy"), ("f1_micro", "val_f1_micro")]


def size_histogram_figure(before: pd.DataFrame, after: pd.DataFrame) -> go.Figure:
    """Character-count histograms (bin_lo, bin_hi, count) before and after cleaning."""
    fig = go.Figure()
    for name, df in (("raw", before), ("cleaned", after)):
        if df is None or df.empty:
            continue
        fig.add_trace(go.Bar(
            x=(df["bin_lo"] + df["bin_hi"]) / 2,
            y=df["count"],
            width=(df["bin_hi"] - df["bin_lo"]),
            name=name,
            opacity=0.6,
        ))
    fig.update_layout(
        barmode="overlay", xaxis_title="Characters per log", yaxis_title="Logs",
        height=400, margin=dict(t=20),
    )
    return fig


def training_curves_figure(history: pd.DataFrame, metric: str = "loss") -> go.Figure:
    pairs = dict(TRAINING_CURVES)
    if metric not in pairs:
        raise ValueError(f"metric must be one of {sorted(pairs)}, got {metric!r}")
    fig = go.Figure()
    for column, label in ((metric, "train"), (pairs[metric], "validation")):
        if column in history:
            fig.add_trace(go.Scatter(x=history["epoch"], y=history[column], mode="lines", name=label))
    fig.update_layout(
        xaxis_title="Epoch", yaxis_title=metric, hovermode="x unified",
        height=350, margin=dict(t=20),
    )
    return fig


def confusion_figure(confusion: pd.DataFrame) -> go.Figure:
    """confusion: square frame, index = true class, columns = predicted class."""
    fig = go.Figure(go.Heatmap(
        z=confusion.values,
        x=[str(c) for c in confusion.columns],
        y=[str(i) for i in confusion.index],
        colorscale="Blues",
        text=confusion.values,
        texttemplate="%{text}",
    ))
    fig.update_layout(
        xaxis_title="Predicted", yaxis_title="True", yaxis_autorange="reversed",
        height=400, margin=dict(t=20),
    )
    return fig


def context_sweep_figure(sweep: pd.DataFrame) -> go.Figure:
    fig = go.Figure()
    for column in ("accuracy", "f1_macro"):
        fig.add_trace(go.Scatter(
            x=sweep["max_len"], y=sweep[column], mode="lines+markers", name=column,
        ))
    fig.update_layout(
        xaxis_type="log", xaxis_title="Context size (characters)", yaxis_title="Score",
        hovermode="x unified", height=400, margin=dict(t=20),
    )
    return fig
