import numpy as np
import pytest

from conftest import tweet
from crisisgraph.diffcore import ParamStore, gradient_check, sum_all, mul
from crisisgraph.encoder import (IMPORTED, MEANPOOL, TABLE_PARAM, Encoder, EncoderSpec, encode,
                          load_imported_embeddings)
from crisisgraph.errors import DataError, ShapeError


def meanpool(vocab, table):
    enc = Encoder(EncoderSpec(MEANPOOL, len(table[0]), vocabulary=tuple(vocab)))
    store = ParamStore()
    store.add(TABLE_PARAM, np.array(table, dtype=float))
    return enc, store


def test_meanpool_examples():
    enc, store = meanpool(["a", "b"], [[1, 0], [0, 1]])
    assert np.array_equal(encode(tweet("1", ["a", "b"], ()), enc, store).vector, [0.5, 0.5])
    assert np.array_equal(encode(tweet("2", [], ()), enc, store).vector, [0, 0])
    assert np.array_equal(encode(tweet("3", ["a", "a", "b", "zzz"], ()), enc, store).vector, [2 / 3, 1 / 3])


def test_for_training_builds_sorted_vocab():
    enc = Encoder.for_training(EncoderSpec(d=3), [tweet("1", ["b", "a"], ()), tweet("2", ["c", "a"], ())])
    assert enc.spec.vocabulary == ("a", "b", "c")
    store = ParamStore()
    enc.init_params(store, np.random.default_rng(0), pretrained={"b": np.array([9.0, 9.0, 9.0])})
    assert store[TABLE_PARAM].shape == (3, 3)
    assert np.array_equal(store[TABLE_PARAM].data[1], [9, 9, 9])
    assert np.all(np.abs(store[TABLE_PARAM].data[[0, 2]]) <= 0.25)


def test_pretrained_of_other_width_is_projected():
    enc = Encoder.for_training(EncoderSpec(d=2), [tweet("1", ["a"], ())])
    store = ParamStore()
    enc.init_params(store, np.random.default_rng(0), pretrained={"a": np.ones(5)})
    assert store[TABLE_PARAM].shape == (1, 2)


def test_imported_exact_and_missing_id(tmp_path):
    (tmp_path / "v.txt").write_text("t1 0.1 0.2 0.30000000000000004\nt2 1 2 3\n")
    spec = EncoderSpec(IMPORTED, 3, str(tmp_path / "v.txt"))
    assert np.array_equal(encode(tweet("t1", [], ()), spec, None).vector, [0.1, 0.2, 0.30000000000000004])
    with pytest.raises(DataError, match="t9"):
        encode(tweet("t9", [], ()), spec, None)
    with pytest.raises(ShapeError):
        encode(tweet("t1", [], ()), EncoderSpec(IMPORTED, 4, str(tmp_path / "v.txt")), None)


def test_imported_file_errors(tmp_path):
    (tmp_path / "ok.txt").write_text("a 1 2 3\nb 4 5 6\n")
    assert len(load_imported_embeddings(tmp_path / "ok.txt")) == 2
    (tmp_path / "ragged.txt").write_text("a 1 2 3\nb 4 5 6 7\n")
    with pytest.raises(DataError, match="dimension"):
        load_imported_embeddings(tmp_path / "ragged.txt")
    (tmp_path / "dup.txt").write_text("a 1 2\na 3 4\n")
    with pytest.raises(DataError, match="duplicate"):
        load_imported_embeddings(tmp_path / "dup.txt")


def test_spec_validation_and_round_trip():
    with pytest.raises(DataError):
        EncoderSpec(IMPORTED, 3)
    with pytest.raises(DataError):
        EncoderSpec("bert", 3)
    spec = EncoderSpec(MEANPOOL, 4, vocabulary=("x", "y"))
    assert EncoderSpec.from_dict(spec.to_dict()) == spec


def test_meanpool_gradient_and_determinism():
    rng = np.random.default_rng(3)
    enc, store = meanpool(["a", "b", "c"], rng.normal(size=(3, 4)))
    tweets = [tweet("1", ["a", "c"], ()), tweet("2", ["b", "b", "a"], ())]
    w = rng.normal(size=(2, 4))
    err = gradient_check(lambda: sum_all(mul(enc.encode_batch(tweets, store), w)), [store[TABLE_PARAM]])
    assert err < 1e-3
    assert np.array_equal(enc.encode_batch(tweets, store).data, enc.encode_batch(tweets, store).data)
