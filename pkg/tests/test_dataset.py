import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crisisgraph.dataset import (DatasetSplit, LabelVocabulary, RawTweet, encode_labels, load_corpus, make_split,
                          save_corpus, select)
from crisisgraph.errors import DataError, FormatError

NAMES = st.sampled_from(["Advice", "News", "MovePeople", "Weather", "Donations"])


def write_lines(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return path


def test_vocab_sorted_from_file(tmp_path):
    p = write_lines(tmp_path / "c.jsonl", [
        {"id": "1", "text": "a", "labels": ["News"]},
        {"id": "2", "text": "b", "labels": ["News", "Advice"]},
        {"id": "3", "text": "c", "labels": []},
    ])
    corpus, vocab = load_corpus(p)
    assert len(corpus) == 3
    assert vocab.labels == ("Advice", "News")


def test_empty_file(tmp_path):
    p = tmp_path / "e.jsonl"
    p.write_text("")
    corpus, vocab = load_corpus(p)
    assert corpus == [] and vocab.k == 0


def test_unknown_label_named(tmp_path):
    p = write_lines(tmp_path / "c.jsonl", [{"id": "1", "text": "x", "labels": ["MovePeople"]}])
    with pytest.raises(DataError, match="unknown label MovePeople"):
        load_corpus(p, LabelVocabulary(("Advice", "News")))


def test_malformed_line_names_line_number(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text('{"id": "1", "text": "x", "labels": []}\n{not json\n')
    with pytest.raises(DataError, match="line 2"):
        load_corpus(p)


def test_duplicate_ids_rejected(tmp_path):
    p = write_lines(tmp_path / "c.jsonl", [{"id": "1", "text": "a"}, {"id": "1", "text": "b"}])
    with pytest.raises(DataError, match="duplicate"):
        load_corpus(p)


def test_priority_out_of_range(tmp_path):
    p = write_lines(tmp_path / "c.jsonl", [{"id": "1", "text": "a", "priority": 1.5}])
    with pytest.raises(DataError, match="line 1"):
        load_corpus(p)


def test_split_sizes_for_100():
    corpus = [RawTweet(f"t{i}", "x") for i in range(100)]
    s = make_split(corpus)
    assert (len(s.train), len(s.valid), len(s.test)) == (64, 16, 20)
    assert set(s.train) | set(s.valid) | set(s.test) == {t.id for t in corpus}


def test_split_is_deterministic():
    corpus = [RawTweet(f"t{i}", "x") for i in range(30)]
    assert make_split(corpus, seed=4) == make_split(corpus, seed=4)
    assert make_split(corpus, seed=4).train != make_split(corpus, seed=5).train


def test_split_too_small():
    with pytest.raises(DataError):
        make_split([RawTweet("a", "x"), RawTweet("b", "y")])


def test_split_three_tweets_fills_every_part():
    s = make_split([RawTweet(c, "x") for c in "abc"])
    assert len(s.train) == len(s.valid) == len(s.test) == 1


@pytest.mark.parametrize("labels, bits", [({"B"}, (0, 1, 0)), (set(), (0, 0, 0)), ({"A", "C"}, (1, 0, 1))])
def test_encode_labels(labels, bits):
    vocab = LabelVocabulary(("A", "B", "C"))
    assert encode_labels(RawTweet("t", "", sorted(labels)), vocab) == bits


def test_vocab_rejects_duplicates():
    with pytest.raises(DataError):
        LabelVocabulary(("A", "A"))


def test_split_file_round_trip(tmp_path):
    s = make_split([RawTweet(f"t{i}", "x") for i in range(10)], seed=9)
    s.save(tmp_path / "s.json")
    assert DatasetSplit.load(tmp_path / "s.json") == s
    (tmp_path / "bad.json").write_text("[1, 2")
    with pytest.raises(FormatError):
        DatasetSplit.load(tmp_path / "bad.json")


def test_select_follows_id_order():
    corpus = [RawTweet(c, c) for c in "abcd"]
    assert [t.id for t in select(corpus, ["c", "a"])] == ["c", "a"]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.sets(NAMES), st.none() | st.floats(0, 1)), max_size=15))
def test_corpus_round_trip_and_label_decode(tmp_path_factory, rows):
    corpus = [RawTweet(f"id{i}", f"text {i} ✓", sorted(labels), pr) for i, (labels, pr) in enumerate(rows)]
    path = tmp_path_factory.mktemp("rt") / "c.jsonl"
    save_corpus(corpus, path)
    loaded, vocab = load_corpus(path)
    again, vocab2 = load_corpus(path)
    assert loaded == corpus
    assert vocab == vocab2
    for t in loaded:
        assert vocab.decode(encode_labels(t, vocab)) == set(t.labels)


@settings(max_examples=50, deadline=None)
@given(st.integers(3, 200), st.integers(0, 2**31))
def test_split_partitions_ids(n, seed):
    corpus = [RawTweet(f"t{i}", "x") for i in range(n)]
    s = make_split(corpus, seed=seed)
    ids = list(s.train) + list(s.valid) + list(s.test)
    assert sorted(ids) == sorted(t.id for t in corpus)
    assert min(len(s.train), len(s.valid), len(s.test)) >= 1
