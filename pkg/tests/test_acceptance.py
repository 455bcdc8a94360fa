"""Synthetic end-to-end benchmarks. Slow: run with pytest --runslow."""
import pytest

from src.corpus.ppu import PpuConfig, clean_records
from src.corpus.records import scan_corpus
from src.corpus.size_filter import apply_size_filter, tukey_filter
from src.corpus.training_corpus import build_training_corpus
from src.models.log_cnn import ArchConfig, build_model
from src.models.sweep import depth_robustness, sweep_context
from src.models.train_classifier import TrainConfig, evaluate, split_dataset, train
from src.synth.synlog import MANIFEST_NAME, SynConfig, generate_dataset
from src.vocab.char_vocab import build_vocab

FAST_TRAIN = TrainConfig(lr=1e-3, max_epochs=30, early_stop_patience=5, batch_size=32, seed=0)
N_JOBS = 8


def _prepared(tmp_path_factory, synth: SynConfig):
    data = tmp_path_factory.mktemp("synth")
    generate_dataset(synth, data, n_jobs=N_JOBS)
    records = clean_records(scan_corpus(data, data / MANIFEST_NAME, n_jobs=N_JOBS), PpuConfig(), n_jobs=N_JOBS)
    kept = apply_size_filter(records, tukey_filter(records))
    tr, va, te = split_dataset(kept, 0.3, 0.1, seed=0)
    return tr, va, te, build_vocab(build_training_corpus(tr))


@pytest.fixture(scope="module")
def benchmark(tmp_path_factory):
    return _prepared(tmp_path_factory, SynConfig())


@pytest.mark.slow
def test_default_classifier_on_synthetic_benchmark(benchmark):
    tr, va, te, vocab = benchmark
    model = build_model(ArchConfig(max_len=5000), vocab.size, seed=0)
    train(model, tr, va, FAST_TRAIN, vocab)
    metrics = evaluate(model, te, vocab)

    assert metrics.accuracy >= 0.93
    assert metrics.f1_macro >= 0.85
    for name, row in metrics.per_class.items():
        assert row["recall"] > 0.7, name


@pytest.mark.slow
def test_robust_to_conv_depth(benchmark):
    tr, va, te, vocab = benchmark
    table = depth_robustness(tr, va, te, vocab, ArchConfig(max_len=5000), FAST_TRAIN, [1, 2, 3, 4])
    assert table["conv_layers"].tolist() == [1, 2, 3, 4]
    assert (table["accuracy"] >= 0.90).all()


@pytest.mark.slow
def test_longer_context_sees_more_signatures(tmp_path_factory):
    # ~10k-char logs: a 500-char window misses most signatures
    synth = SynConfig(n_samples=1500, mean_blocks_per_log=66, seed=1)
    tr, va, te, vocab = _prepared(tmp_path_factory, synth)
    arch = ArchConfig(conv_layers=[(64, 5), (64, 5)], dense_units=[32])
    table = sweep_context(tr, va, te, vocab, arch, FAST_TRAIN, [500, 5000]).set_index("max_len")
    assert table.loc[5000, "accuracy"] >= table.loc[500, "accuracy"] + 0.05
