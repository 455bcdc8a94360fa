from src.corpus.records import LogRecord
from src.corpus.training_corpus import build_training_corpus, read_training_corpus, write_training_corpus


def test_records_joined_in_id_order():
    records = [LogRecord.from_text("b.log", "I: two"), LogRecord.from_text("a.log", "C: one\r\n")]
    assert build_training_corpus(records) == "C: one\r\n\nI: two"


def test_write_read_keeps_bytes(tmp_path):
    corpus = "C: a\r\nI: b\né"
    path = write_training_corpus(corpus, tmp_path / "sub" / "corpus.txt")
    assert read_training_corpus(path) == corpus
    assert path.read_bytes() == corpus.encode("utf-8")
