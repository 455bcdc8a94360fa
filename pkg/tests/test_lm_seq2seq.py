import math

import numpy as np
import pytest

from src.config.seeding import module_rng
from src.models.checkpoint import CheckpointError
from src.models.lm_seq2seq import (
    CharLanguageModel,
    LmConfig,
    NoBlocksError,
    SequenceWindows,
    extract_char_embeddings,
    lm_next_char_probs,
    lm_param_count,
    lm_train,
    load_char_embeddings,
    make_sequence_pairs,
    median_block_length,
    pair_count,
    save_char_embeddings,
)
from src.vocab.char_vocab import build_vocab, encode


def test_param_count_anchor():
    assert lm_param_count(LmConfig(embed_dim=64, lstm_units=1024), 97) == 4_566_177


def test_param_count_matches_built_model():
    cfg = LmConfig(embed_dim=5, lstm_units=7)
    model = CharLanguageModel(cfg, 11, module_rng(0, "lm.init"))
    assert model.param_count() == lm_param_count(cfg, 11)


@pytest.mark.parametrize("n,l_s,l_w", [(10, 4, 1), (10, 4, 2), (11, 3, 3), (7, 6, 1)])
def test_sequence_pairs_match_enumeration(n, l_s, l_w):
    ids = np.arange(n)
    pairs = list(make_sequence_pairs(ids, l_s, l_w))
    expected = []
    start = 0
    while start + l_w + l_s <= n:
        expected.append((list(range(start, start + l_s)), list(range(start + l_w, start + l_w + l_s))))
        start += l_w
    assert len(pairs) == len(expected) == pair_count(n, l_s, l_w)
    for pair, (inp, tgt) in zip(pairs, expected):
        assert pair.inputs.tolist() == inp
        assert pair.targets.tolist() == tgt


def test_sequence_pairs_reject_bad_lengths():
    with pytest.raises(ValueError):
        list(make_sequence_pairs(np.arange(5), 4, 2))
    with pytest.raises(ValueError):
        list(make_sequence_pairs(np.arange(50), 4, 5))


def test_median_block_length():
    assert median_block_length("I: a\nC: bb\n  x\nI: c") == 5
    # even count: lower median
    assert median_block_length("I: a\nC: bbb") == 5
    assert median_block_length("  C: indented\nI: x") == 4


def test_no_blocks_raises():
    with pytest.raises(NoBlocksError):
        median_block_length("plain text without markers")


def _toy_run(tmp_path=None):
    corpus = "ab" * 200
    vocab = build_vocab(corpus)
    ids = encode(corpus, vocab, len(corpus))
    cfg = LmConfig(
        seq_len=8, embed_dim=8, lstm_units=16, lr=1e-2, batch_size=16,
        max_epochs=50, early_stop_patience=10, max_steps=200, seed=3,
    )
    ckpt = lm_train(ids, vocab, cfg, checkpoint_dir=tmp_path)
    return ckpt, vocab


def test_toy_language_model_learns_period_two(tmp_path):
    ckpt, vocab = _toy_run(tmp_path)

    assert abs(ckpt.metrics["initial_loss"] - math.log(vocab.size)) < 0.05 * math.log(vocab.size)
    probs = lm_next_char_probs(ckpt, "abab")
    assert probs[vocab.char_to_id["a"]] > 0.9
    assert np.isclose(probs.sum(), 1.0)
    assert (tmp_path / "lm_last.ckpt").exists()
    assert (tmp_path / "lm_best.ckpt").exists()


def test_training_is_deterministic():
    first, _ = _toy_run()
    second, _ = _toy_run()
    assert first.metrics["history"] == pytest.approx(second.metrics["history"], abs=1e-6)
    for name, value in first.params.items():
        assert np.array_equal(value, second.params[name])


def test_embedding_export_round_trip(tmp_path):
    ckpt, vocab = _toy_run()
    table, emb_vocab = extract_char_embeddings(ckpt)
    assert table.shape == (vocab.size, 8)
    assert np.array_equal(table, ckpt.params["embedding.table"])

    path = save_char_embeddings(tmp_path / "emb.bin", table, emb_vocab)
    loaded, loaded_vocab = load_char_embeddings(path, expected_vocab=vocab)
    assert np.array_equal(loaded, table)
    assert loaded_vocab == vocab

    with pytest.raises(CheckpointError):
        load_char_embeddings(path, expected_vocab=build_vocab("xyz"))


def test_sequence_windows_view_the_corpus_without_copying():
    ids = np.arange(100, dtype=np.int32)
    windows = SequenceWindows(ids, 10, 3)
    assert np.shares_memory(windows.windows, ids)
    assert len(windows) == pair_count(100, 10, 3)
    assert len(SequenceWindows(ids, 10, 3, limit=5)) == 5

    inputs, targets = windows.batch(np.array([4, 0]))
    assert inputs.tolist() == [list(range(12, 22)), list(range(0, 10))]
    assert targets.tolist() == [list(range(15, 25)), list(range(3, 13))]


def test_training_gathers_one_batch_of_pairs_at_a_time(monkeypatch):
    gathered = []
    original = SequenceWindows.batch

    def recording_batch(self, idx):
        pair = original(self, idx)
        gathered.append(pair.inputs.shape[0])
        return pair

    monkeypatch.setattr(SequenceWindows, "batch", recording_batch)
    ckpt, _ = _toy_run()
    assert gathered
    assert max(gathered) <= 16
    assert ckpt.metrics["steps"] == 200


def test_loss_decreases_over_first_epochs():
    ckpt, _ = _toy_run()
    history = ckpt.metrics["history"]
    assert ckpt.metrics["initial_loss"] > history[0]
    assert history[0] > history[1] > history[2]


@pytest.mark.parametrize("patience,epochs_run", [(0, 2), (1, 2), (3, 4)])
def test_early_stopping_after_patience_epochs_without_improvement(monkeypatch, patience, epochs_run):
    original = CharLanguageModel.loss_and_grad
    calls = []

    def rising_loss(self, inputs, targets):
        _, grad = original(self, inputs, targets)
        calls.append(1)
        return float(len(calls)), grad

    monkeypatch.setattr(CharLanguageModel, "loss_and_grad", rising_loss)
    corpus = "ab" * 50
    vocab = build_vocab(corpus)
    cfg = LmConfig(seq_len=8, embed_dim=4, lstm_units=4, batch_size=32, max_epochs=20, early_stop_patience=patience)
    ckpt = lm_train(encode(corpus, vocab, len(corpus)), vocab, cfg)

    # epoch 1 is the only improvement
    assert len(ckpt.metrics["history"]) == epochs_run


def test_lm_config_rejects_negative_patience():
    with pytest.raises(ValueError):
        LmConfig(early_stop_patience=-1)


def _cosine(a, b):
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def test_interchangeable_characters_get_similar_embeddings():
    # "x" and "y" always precede "ab"; "z" always precedes "cd"
    rng = np.random.default_rng(0)
    corpus = "".join(rng.choice(["xab.", "yab.", "zcd."], size=800))
    vocab = build_vocab(corpus)
    cfg = LmConfig(
        seq_len=8, embed_dim=8, lstm_units=16, lr=1e-2, batch_size=32,
        max_epochs=20, early_stop_patience=20, max_steps=400, seed=1,
    )
    ckpt = lm_train(encode(corpus, vocab, len(corpus)), vocab, cfg)
    table, _ = extract_char_embeddings(ckpt)
    x, y, z = (table[vocab.char_to_id[c]] for c in "xyz")

    assert _cosine(x, y) > _cosine(x, z)
    assert _cosine(x, y) > _cosine(y, z)
