import numpy as np
import pytest

from src.corpus.records import CLASS_NAMES, LogRecord
from src.models import train_classifier
from src.models.checkpoint import CheckpointError, ModelCheckpoint
from src.models.log_cnn import ArchConfig, ResidualCNN, build_model, classifier_param_count
from src.models.train_classifier import (
    TrainConfig,
    class_weights,
    evaluate,
    predict,
    predict_proba,
    split_dataset,
    train,
)
from src.nn.functional import ShapeError
from src.vocab.char_vocab import build_vocab, encode_batch
from tests.factories import make_small_records

SMALL_ARCH = dict(max_len=1200, embed_dim=16, conv_layers=[(32, 5)], dense_units=[16])


def test_default_param_count():
    arch = ArchConfig()
    model = build_model(arch, 99)
    assert model.param_count() == 777_732
    assert 500_000 <= model.param_count() <= 1_000_000


@pytest.mark.parametrize(
    "arch",
    [
        ArchConfig(max_len=100, embed_dim=8, conv_layers=[(8, 3)], dense_units=[]),
        ArchConfig(max_len=100, embed_dim=8, conv_layers=[(16, 5), (16, 3)], residual=False),
        ArchConfig(max_len=100, embed_dim=8, conv_layers=[(12, 3)], bilstm_front=True, bilstm_units=4),
    ],
)
def test_param_count_formula_matches_model(arch):
    assert build_model(arch, 30).param_count() == classifier_param_count(arch, 30)


def test_arch_rejects_even_kernel_and_long_context():
    with pytest.raises(ValueError):
        ArchConfig(conv_layers=[(8, 4)])
    with pytest.raises(ValueError):
        ArchConfig(max_len=200_001)


def test_forward_shape_and_init_embeddings():
    arch = ArchConfig(max_len=40, embed_dim=4, conv_layers=[(6, 3)], dense_units=[5])
    table = np.arange(40, dtype=np.float32).reshape(10, 4)
    model = build_model(arch, 10, init_embeddings=table)
    assert np.array_equal(model.embedding_table, table)
    logits = model.forward(np.zeros((3, 40), dtype=np.int32))
    assert logits.shape == (3, 4)

    with pytest.raises(ShapeError):
        build_model(arch, 10, init_embeddings=np.zeros((10, 5)))


def test_class_weights():
    w = class_weights({"Pass": 60, "L0_L1": 20, "L2": 15, "L3": 5})
    assert np.allclose(w, [100 / 240, 100 / 80, 100 / 60, 100 / 20])
    assert np.allclose(class_weights({name: 7 for name in CLASS_NAMES}), 1.0)
    with pytest.raises(ValueError, match="L3"):
        class_weights({"Pass": 3, "L0_L1": 2, "L2": 1, "L3": 0})


def test_split_is_stratified_and_disjoint():
    records = [LogRecord.from_text(f"log_{i:03d}", "I: x", CLASS_NAMES[i % 4]) for i in range(200)]
    tr, va, te = split_dataset(records, test_fraction=0.3, val_fraction=0.1, seed=1)

    ids = [r.id for r in tr + va + te]
    assert len(ids) == len(set(ids)) == 200
    assert len(te) == 60
    for part in (tr, te):
        counts = {name: sum(r.label == name for r in part) for name in CLASS_NAMES}
        assert max(counts.values()) - min(counts.values()) <= 1
    assert [r.id for r in tr] == sorted(r.id for r in tr)


def test_split_falls_back_when_a_class_is_tiny():
    records = [LogRecord.from_text(f"log_{i:03d}", "I: x", "Pass") for i in range(20)]
    records.append(LogRecord.from_text("log_999", "I: x", "L3"))
    tr, va, te = split_dataset(records, seed=0)
    assert len(tr) + len(va) + len(te) == 21


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(max_epochs=10, early_stop_patience=10)
    with pytest.raises(ValueError):
        TrainConfig(early_stop_patience=-1)


def _fit(records, max_epochs=100, seed=0):
    vocab = build_vocab("".join(r.text for r in records))
    model = build_model(ArchConfig(**SMALL_ARCH), vocab.size, seed=seed)
    cfg = TrainConfig(lr=3e-3, max_epochs=max_epochs, early_stop_patience=max_epochs - 1, batch_size=16, l2=0.0, seed=seed)
    ckpt, history = train(model, records, records, cfg, vocab)
    return model, ckpt, history, vocab


def test_small_model_overfits_training_set(small_records):
    model, ckpt, history, vocab = _fit(small_records)

    metrics = evaluate(model, small_records, vocab)
    assert metrics.accuracy == 1.0
    assert list(history.columns) == [
        "epoch", "loss", "accuracy", "f1_micro", "val_loss", "val_accuracy", "val_f1_micro",
    ]
    assert history["loss"].iloc[-1] < history["loss"].iloc[0]
    assert ckpt.metrics["best_epoch"] == int(history["val_loss"].idxmin()) + 1


def test_training_is_deterministic():
    records = make_small_records(per_class=4, seed=5)
    _, first, h1, _ = _fit(records, max_epochs=3, seed=2)
    _, second, h2, _ = _fit(records, max_epochs=3, seed=2)
    assert h1.equals(h2)
    for name, value in first.params.items():
        assert np.array_equal(value, second.params[name])


def test_checkpoint_round_trip_predicts_identically(tmp_path):
    records = make_small_records(per_class=3, seed=1)
    model, ckpt, _, vocab = _fit(records, max_epochs=2)

    path = ckpt.save(tmp_path / "classifier.ckpt")
    loaded = ResidualCNN.from_checkpoint(ModelCheckpoint.load(path, expected_kind="classifier"))
    ids = encode_batch([r.text for r in records], vocab, SMALL_ARCH["max_len"])
    assert np.array_equal(predict_proba(model, ids), predict_proba(loaded, ids))

    with pytest.raises(CheckpointError):
        ModelCheckpoint.load(path, expected_kind="lm")


def test_predict_ties_go_to_lowest_index():
    arch = ArchConfig(max_len=10, embed_dim=4, conv_layers=[(4, 3)], dense_units=[])
    model = build_model(arch, 6)
    for name, value in model.parameters().items():
        if name.startswith("output"):
            value[...] = 0.0
    vocab = build_vocab("abcd")
    name, probs = predict(model, LogRecord.from_text("x", "abcd"), vocab)
    assert name == "Pass"
    assert np.allclose(probs, 0.25)


@pytest.mark.parametrize(
    "val_losses,patience,epochs_run,best_epoch",
    [
        ([1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 0, 2, 1),
        ([1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 1, 2, 1),
        ([1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 2, 3, 1),
        ([3.0, 2.0, 2.5, 2.0, 2.5, 1.0, 0.5, 0.4], 3, 5, 2),
    ],
)
def test_early_stopping_counts_epochs_without_improvement(monkeypatch, val_losses, patience, epochs_run, best_epoch):
    losses = iter(val_losses)

    def scripted_eval_loss(model, ids, labels, batch_size):
        return next(losses), np.zeros(len(labels), dtype=labels.dtype)

    monkeypatch.setattr(train_classifier, "_eval_loss", scripted_eval_loss)
    records = make_small_records(per_class=2, seed=3)
    vocab = build_vocab("".join(r.text for r in records))
    model = build_model(ArchConfig(**SMALL_ARCH), vocab.size)
    cfg = TrainConfig(lr=1e-3, max_epochs=len(val_losses), early_stop_patience=patience, batch_size=16)

    ckpt, history = train(model, records, records, cfg, vocab)

    assert len(history) == epochs_run
    assert ckpt.metrics["best_epoch"] == best_epoch
