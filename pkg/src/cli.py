"""
Command-line entry point: python -m src.cli <subcommand> [flags] [--section.key=value ...]

Every subcommand reads the same run configuration (INI file plus overrides)
and writes its artifacts under --out. Exit codes: 0 success, 1 internal
error, 2 user or configuration error.
"""
import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import uvicorn

from src.config.run_config import ConfigError, RunConfig, load_run_config, parse_override_args
from src.config.settings import print_settings_summary
from src.corpus.ppu import PpuConfig, clean_records, preprocess_log
from src.corpus.records import CLASS_NAMES, CorpusError, LogRecord, decode_log_bytes, label_counts, scan_corpus
from src.corpus.size_filter import apply_size_filter, histogram_frame, tukey_filter
from src.corpus.training_corpus import build_training_corpus, read_training_corpus, write_training_corpus
from src.embed.doc_embed import embed_document, write_embedding_store
from src.embed.embed_classifier import HeadConfig, embed_classifier
from src.embed.providers import HttpEmbeddingProvider, MockProvider
from src.models.checkpoint import ModelCheckpoint
from src.models.lm_seq2seq import (
    extract_char_embeddings,
    lm_train,
    load_char_embeddings,
    median_block_length,
    save_char_embeddings,
)
from src.models.log_cnn import ResidualCNN, build_model
from src.models.sweep import DEFAULT_CONTEXT_GRID, DEFAULT_DEPTHS, depth_robustness, sweep_context
from src.models.train_classifier import evaluate, predict, split_dataset, train
from src.run_log import log_event, set_log_dir
from src.synth.synlog import generate_dataset
from src.vocab.char_vocab import CharVocab, build_vocab, encode, load_vocab, save_vocab

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2

CLEAN_DIR = "clean"
MANIFEST_NAME = "manifest.csv"


class UsageError(ValueError):
    """Bad arguments or missing inputs; reported with exit code 2."""


# --- helpers ----------------------------------------------------------------


def _out(cfg: RunConfig, *parts: str) -> Path:
    return cfg.out_dir.joinpath(*parts)


def _manifest_for(data_dir: Path, explicit: Optional[str]) -> Optional[Path]:
    if explicit:
        return Path(explicit)
    candidate = data_dir / MANIFEST_NAME
    return candidate if candidate.exists() else None


def _labeled_records(data_dir: Path, manifest: Optional[str], n_jobs: int) -> List[LogRecord]:
    records = scan_corpus(data_dir, _manifest_for(data_dir, manifest), n_jobs=n_jobs)
    labeled = [r for r in records if r.label is not None]
    if not labeled:
        raise CorpusError(f"no labeled logs found in {data_dir}")
    return labeled


def _data_dir(cfg: RunConfig, arg: Optional[str]) -> Path:
    return Path(arg) if arg else _out(cfg, CLEAN_DIR)


def _vocab_for(cfg: RunConfig, records: List[LogRecord]) -> CharVocab:
    path = _out(cfg, "vocab.json")
    if path.exists():
        return load_vocab(path)
    log_event("⚠️ No vocab.json in the run directory; building the vocabulary from the training logs.")
    return build_vocab(build_training_corpus(records))


def _write_clean_dir(records: List[LogRecord], clean_dir: Path) -> None:
    clean_dir.mkdir(parents=True, exist_ok=True)
    for r in records:
        path = clean_dir / r.id
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as f:
            f.write(r.text)
    rows = [{"path": r.id, "label": r.label} for r in records if r.label is not None]
    pd.DataFrame(rows, columns=["path", "label"]).to_csv(clean_dir / MANIFEST_NAME, index=False)


def _make_provider(cfg: RunConfig):
    e = cfg.embed
    if e.provider == "mock":
        return MockProvider(dim=e.dim, seed=cfg.seed, context_capacity=max(e.context_capacity, e.context))
    if not e.endpoint:
        raise UsageError("--provider http needs --endpoint URL (or embed.endpoint in the config)")
    return HttpEmbeddingProvider(
        e.endpoint,
        auth_token=e.auth_token or os.getenv("LOGTRIAGE_EMBED_TOKEN"),
        timeout=e.timeout,
        context_capacity=e.context_capacity,
        max_in_flight=e.max_in_flight,
    )


# --- subcommands -------------------------------------------------------------


def cmd_synth(cfg: RunConfig, args) -> int:
    out_dir = Path(args.data) if args.data else _out(cfg, "data")
    paths, manifest = generate_dataset(cfg.synth, out_dir, n_jobs=cfg.run.n_jobs)
    counts = manifest["label"].value_counts().reindex(CLASS_NAMES, fill_value=0)
    log_event(f"✅ Wrote {len(paths)} synthetic logs to {out_dir}")
    log_event("   " + ", ".join(f"{name}: {int(n)}" for name, n in counts.items()))
    return EXIT_OK


def cmd_preprocess(cfg: RunConfig, args) -> int:
    in_dir = Path(args.input)
    if not in_dir.is_dir():
        raise UsageError(f"Input directory not found: {in_dir}")
    records = scan_corpus(in_dir, _manifest_for(in_dir, args.manifest), n_jobs=cfg.run.n_jobs)
    if not records:
        raise CorpusError(f"no logs found in {in_dir}")
    log_event(f"Scanned {len(records)} logs from {in_dir}")

    cleaned = clean_records(records, cfg.corpus.ppu(), n_jobs=cfg.run.n_jobs)
    if not cleaned:
        raise CorpusError(f"no logs found in {in_dir} matching the category patterns")
    report = tukey_filter(cleaned, cfg.corpus.hard_cap_bytes)
    kept = apply_size_filter(cleaned, report)
    log_event(
        f"Size filter: kept {len(report.kept_ids)}, dropped {len(report.dropped_ids)} "
        f"(bounds {report.lower_bound:.1f} .. {report.upper_bound:.1f} chars)"
    )
    for dropped in report.dropped_ids:
        log_event(f"⚠️ Dropped size outlier {dropped}", echo=False)
    if not kept:
        raise CorpusError("every log was dropped by the size filter")

    corpus = build_training_corpus(kept)
    vocab = build_vocab(corpus)
    write_training_corpus(corpus, _out(cfg, "corpus.txt"))
    save_vocab(vocab, _out(cfg, "vocab.json"))
    report.write_json(_out(cfg, "filter_report.json"))
    histogram_frame(records, cfg.corpus.hist_bins).to_csv(_out(cfg, "hist_raw.csv"), index=False)
    histogram_frame(kept, cfg.corpus.hist_bins).to_csv(_out(cfg, "hist_clean.csv"), index=False)
    _write_clean_dir(kept, _out(cfg, CLEAN_DIR))

    counts = label_counts(kept)
    log_event(f"✅ Training corpus: {len(corpus):,} chars, vocabulary size {vocab.size}")
    log_event("   " + ", ".join(f"{name}: {n}" for name, n in counts.items()))
    return EXIT_OK


def cmd_lm_train(cfg: RunConfig, args) -> int:
    corpus_path = Path(args.corpus) if args.corpus else _out(cfg, "corpus.txt")
    if not corpus_path.exists():
        raise UsageError(f"Training corpus not found at {corpus_path}; run preprocess first.")
    corpus = read_training_corpus(corpus_path)
    vocab_path = _out(cfg, "vocab.json")
    vocab = load_vocab(vocab_path) if vocab_path.exists() else build_vocab(corpus)

    lm_cfg = replace(cfg.lm, seq_len=cfg.lm.seq_len or median_block_length(corpus))
    log_event(f"LM sequence length {lm_cfg.seq_len}, shift {lm_cfg.shift}")
    ids = encode(corpus, vocab, len(corpus))
    ckpt = lm_train(ids, vocab, lm_cfg, checkpoint_dir=_out(cfg, "lm"))
    ckpt.save(_out(cfg, "lm.ckpt"))
    log_event(
        f"✅ LM trained: initial loss {ckpt.metrics['initial_loss']:.4f}, "
        f"best loss {ckpt.metrics['best_loss']:.4f} -> {_out(cfg, 'lm.ckpt')}"
    )
    return EXIT_OK


def cmd_lm_export_emb(cfg: RunConfig, args) -> int:
    lm_path = Path(args.lm) if args.lm else _out(cfg, "lm.ckpt")
    table, vocab = extract_char_embeddings(ModelCheckpoint.load(lm_path, expected_kind="lm"))
    out_path = save_char_embeddings(_out(cfg, "char_embeddings.bin"), table, vocab)
    log_event(f"✅ Exported character embeddings: shape ({table.shape[0]}, {table.shape[1]}) -> {out_path}")
    return EXIT_OK


def _splits(cfg: RunConfig, args) -> Tuple[List[LogRecord], List[LogRecord], List[LogRecord]]:
    records = _labeled_records(_data_dir(cfg, args.data), args.manifest, cfg.run.n_jobs)
    t = cfg.train
    return split_dataset(records, t.test_fraction, t.val_fraction, cfg.seed)


def _init_embeddings(args, vocab: CharVocab) -> Optional[np.ndarray]:
    if not getattr(args, "embeddings", None):
        return None
    table, _ = load_char_embeddings(Path(args.embeddings), expected_vocab=vocab)
    return table


def cmd_clf_train(cfg: RunConfig, args) -> int:
    train_set, val_set, test_set = _splits(cfg, args)
    vocab = _vocab_for(cfg, train_set)
    log_event(f"Split: {len(train_set)} train, {len(val_set)} validation, {len(test_set)} test")

    model = build_model(cfg.arch, vocab.size, _init_embeddings(args, vocab), seed=cfg.seed)
    log_event(f"Residual CNN with {model.param_count():,} parameters, max_len {cfg.arch.max_len}")
    ckpt, history = train(model, train_set, val_set, cfg.train, vocab)
    ckpt.meta["ppu"] = cfg.corpus.ppu().to_dict()

    ckpt.save(_out(cfg, "classifier.ckpt"))
    history.to_csv(_out(cfg, "history.csv"), index=False)
    metrics = evaluate(model, test_set, vocab)
    metrics.write(_out(cfg, "metrics.json"), _out(cfg, "confusion.csv"))
    log_event(
        f"✅ Classifier saved to {_out(cfg, 'classifier.ckpt')}: test accuracy {metrics.accuracy:.4f}, "
        f"macro-F1 {metrics.f1_macro:.4f}"
    )
    return EXIT_OK


def _load_classifier(cfg: RunConfig, args) -> Tuple[ResidualCNN, CharVocab, PpuConfig]:
    path = Path(args.model) if args.model else _out(cfg, "classifier.ckpt")
    ckpt = ModelCheckpoint.load(path, expected_kind="classifier")
    return ResidualCNN.from_checkpoint(ckpt), ckpt.vocab, PpuConfig.from_meta(ckpt.meta, cfg.corpus.ppu())


def cmd_clf_eval(cfg: RunConfig, args) -> int:
    model, vocab, _ = _load_classifier(cfg, args)
    _, _, test_set = _splits(cfg, args)
    metrics = evaluate(model, test_set, vocab)
    metrics.write(_out(cfg, "metrics.json"), _out(cfg, "confusion.csv"))
    log_event(f"✅ Test accuracy {metrics.accuracy:.4f}, macro-F1 {metrics.f1_macro:.4f}, micro-F1 {metrics.f1_micro:.4f}")
    for name, row in metrics.per_class.items():
        log_event(f"   {name:6s} precision {row['precision']:.3f}  recall {row['recall']:.3f}  f1 {row['f1']:.3f}")
    return EXIT_OK


def cmd_clf_predict(cfg: RunConfig, args) -> int:
    model, vocab, ppu = _load_classifier(cfg, args)
    for name in args.files:
        path = Path(name)
        if not path.is_file():
            raise UsageError(f"Log file not found: {path}")
        text = decode_log_bytes(path.read_bytes())
        record = LogRecord.from_text(path.name, preprocess_log(text, ppu))
        label, probs = predict(model, record, vocab)
        names = CLASS_NAMES[: model.arch.n_classes]
        print(json.dumps({
            "path": str(path),
            "class": label,
            "probabilities": {n: round(float(p), 6) for n, p in zip(names, probs)},
        }))
    return EXIT_OK


def cmd_embed(cfg: RunConfig, args) -> int:
    train_set, val_set, test_set = _splits(cfg, args)
    vocab = _vocab_for(cfg, train_set)
    provider = _make_provider(cfg)
    e = cfg.embed

    embeddings = {}
    for r in train_set + val_set + test_set:
        tokens = encode(r.text, vocab, max(r.char_count, 1))
        embeddings[r.id] = embed_document(tokens, provider, e.context, e.overlap_w, e.pooling)
    write_embedding_store(_out(cfg, "doc_embeddings.bin"), embeddings)
    log_event(f"✅ Embedded {len(embeddings)} logs with {provider.provider_id} -> {_out(cfg, 'doc_embeddings.bin')}")

    def matrix(rs):
        return np.stack([embeddings[r.id].vector for r in rs]), [r.label_index for r in rs]

    x_train, y_train = matrix(train_set + val_set)
    head = embed_classifier(x_train, y_train, len(CLASS_NAMES), HeadConfig(lr=e.head_lr, epochs=e.head_epochs, seed=cfg.seed))
    x_test, y_test = matrix(test_set)
    metrics = head.evaluate(x_test, y_test)
    metrics.write(_out(cfg, "embed_metrics.json"), _out(cfg, "embed_confusion.csv"))
    log_event(f"✅ Embedding head: test accuracy {metrics.accuracy:.4f}, macro-F1 {metrics.f1_macro:.4f}")
    return EXIT_OK


def _int_list(text: Optional[str], default: List[int]) -> List[int]:
    if not text:
        return list(default)
    try:
        return [int(v.replace("_", "")) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"Expected a comma-separated list of integers, got {text!r}") from exc


def cmd_sweep_context(cfg: RunConfig, args) -> int:
    train_set, val_set, test_set = _splits(cfg, args)
    vocab = _vocab_for(cfg, train_set)
    grid = _int_list(args.grid, DEFAULT_CONTEXT_GRID)
    df = sweep_context(
        train_set, val_set, test_set, vocab, cfg.arch, cfg.train, grid,
        init_embeddings=_init_embeddings(args, vocab), out_csv=_out(cfg, "context_sweep.csv"),
    )
    log_event(f"✅ Context sweep ({len(df)} sizes) -> {_out(cfg, 'context_sweep.csv')}")
    return EXIT_OK


def cmd_sweep_depth(cfg: RunConfig, args) -> int:
    train_set, val_set, test_set = _splits(cfg, args)
    vocab = _vocab_for(cfg, train_set)
    df = depth_robustness(
        train_set, val_set, test_set, vocab, cfg.arch, cfg.train, _int_list(args.depths, DEFAULT_DEPTHS),
        init_embeddings=_init_embeddings(args, vocab), out_csv=_out(cfg, "depth_sweep.csv"),
    )
    log_event(f"✅ Depth sweep ({len(df)} configurations) -> {_out(cfg, 'depth_sweep.csv')}")
    return EXIT_OK


def cmd_serve(cfg: RunConfig, args) -> int:
    if args.model:
        os.environ["LOGTRIAGE_MODEL_PATH"] = args.model
    print_settings_summary()
    uvicorn.run("src.api.main:app", host=args.host, port=args.port)
    return EXIT_OK


# --- argument parsing --------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI run configuration")
    common.add_argument("--seed", type=int, help="global seed (run.seed)")
    common.add_argument("--out", help="run directory (run.out_dir)")
    common.add_argument("--max-len", type=int, help="classifier context size (arch.max_len)")
    common.add_argument("--bilstm", action="store_true", help="add a BiLSTM in front of the conv stack")
    common.add_argument("--provider", choices=["mock", "http"], help="document-embedding provider")
    common.add_argument("--endpoint", help="embeddings service URL for --provider http")
    common.add_argument("--n-jobs", type=int, help="worker processes (run.n_jobs)")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--data", help="labeled log directory (default: <out>/clean)")
    data.add_argument("--manifest", help="manifest CSV (default: <data>/manifest.csv)")

    parser = argparse.ArgumentParser(prog="logtriage", description="Defect triage for test-equipment logs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a labeled synthetic dataset")
    p.add_argument("--data", help="output directory (default: <out>/data)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess", parents=[common], help="scan, clean and size-filter raw logs")
    p.add_argument("--in", dest="input", required=True, help="raw log directory")
    p.add_argument("--manifest", help="manifest CSV (default: <in>/manifest.csv)")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("lm-train", parents=[common], help="train the character language model")
    p.add_argument("--corpus", help="training corpus (default: <out>/corpus.txt)")
    p.set_defaults(func=cmd_lm_train)

    p = sub.add_parser("lm-export-emb", parents=[common], help="export the LM's character embeddings")
    p.add_argument("--lm", help="LM checkpoint (default: <out>/lm.ckpt)")
    p.set_defaults(func=cmd_lm_export_emb)

    p = sub.add_parser("clf-train", parents=[common, data], help="train the residual CNN classifier")
    p.add_argument("--embeddings", help="character embeddings from lm-export-emb")
    p.set_defaults(func=cmd_clf_train)

    p = sub.add_parser("clf-eval", parents=[common, data], help="evaluate a classifier on the test split")
    p.add_argument("--model", help="classifier checkpoint (default: <out>/classifier.ckpt)")
    p.set_defaults(func=cmd_clf_eval)

    p = sub.add_parser("clf-predict", parents=[common], help="classify log files (JSON lines on stdout)")
    p.add_argument("files", nargs="+")
    p.add_argument("--model", help="classifier checkpoint (default: <out>/classifier.ckpt)")
    p.set_defaults(func=cmd_clf_predict)

    p = sub.add_parser("embed", parents=[common, data], help="document embeddings plus a softmax head")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("sweep-context", parents=[common, data], help="accuracy versus context size")
    p.add_argument("--grid", help="comma-separated max_len values")
    p.add_argument("--embeddings", help="character embeddings from lm-export-emb")
    p.set_defaults(func=cmd_sweep_context)

    p = sub.add_parser("sweep-depth", parents=[common, data], help="accuracy versus number of conv layers")
    p.add_argument("--depths", help="comma-separated conv-layer counts")
    p.add_argument("--embeddings", help="character embeddings from lm-export-emb")
    p.set_defaults(func=cmd_sweep_depth)

    p = sub.add_parser("serve", parents=[common], help="run the triage API")
    p.add_argument("--model", help="classifier checkpoint served by /predict")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)
    return parser


def _flag_overrides(args) -> Dict[str, str]:
    out: Dict[str, str] = {}
    if args.seed is not None:
        out["run.seed"] = str(args.seed)
    if args.out:
        out["run.out_dir"] = args.out
    if args.n_jobs is not None:
        out["run.n_jobs"] = str(args.n_jobs)
    if args.max_len is not None:
        out["arch.max_len"] = str(args.max_len)
    if args.bilstm:
        out["arch.bilstm_front"] = "true"
    if args.provider:
        out["embed.provider"] = args.provider
    if args.endpoint:
        out["embed.endpoint"] = args.endpoint
    return out


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        overrides = parse_override_args(extra)
        overrides.update(_flag_overrides(args))
        cfg = load_run_config(args.config, overrides)
        set_log_dir(cfg.out_dir / "logs")
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        cfg.write_json(cfg.out_dir / "run_config.json")
        return args.func(cfg, args)
    except (ConfigError, UsageError, CorpusError, FileNotFoundError, ValueError) as exc:
        print(f"❌ {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        print(f"❌ Internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
