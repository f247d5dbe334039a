import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import tweet
from crisisgraph.dataset import LabelVocabulary, RawTweet
from crisisgraph.errors import DataError, FormatError
from crisisgraph.metrics import (AawConfig, MetricsReport, aaw, alert_worth, evaluate, hamming_loss, jaccard_mean,
                          load_aaw_config, load_worth_table, report, weighted_f1)
from crisisgraph.relnet import Prediction

AB = LabelVocabulary(("A", "B"))


@st.composite
def label_pairs(draw, min_support=1):
    s = draw(st.integers(1, 20))
    k = draw(st.integers(1, 6))
    bits = st.lists(st.lists(st.integers(0, 1), min_size=k, max_size=k), min_size=s, max_size=s)
    preds, truths = draw(bits), draw(bits)
    if sum(map(sum, truths)) < min_support:
        truths[0][0] = 1
    return preds, truths


def test_weighted_f1_examples():
    assert weighted_f1([(1,)], [(1,)])[0] == 1.0
    f1, per = weighted_f1([(1, 0), (1, 0), (0, 0)], [(1, 0), (1, 0), (0, 1)], AB)
    assert f1 == pytest.approx(2 / 3, abs=1e-15)
    assert per["A"].support == 2 and per["B"].f1 == 0.0
    assert weighted_f1([(0, 0), (0, 0)], [(1, 0), (0, 1)])[0] == 0.0


def test_weighted_f1_errors():
    with pytest.raises(DataError, match="no support"):
        weighted_f1([(1, 0)], [(0, 0)])
    with pytest.raises(DataError):
        weighted_f1([(1, 0)], [(1, 0), (0, 1)])


def test_hamming_examples():
    assert hamming_loss([(1, 0)], [(1, 0)]) == 0.0
    assert hamming_loss([(1, 0, 1)], [(0, 1, 0)]) == 1.0
    assert hamming_loss([(1, 1, 0, 0)], [(1, 0, 1, 0)], 4) == 0.5
    with pytest.raises(DataError):
        hamming_loss([(1,)], [(1,), (0,)])


def test_jaccard_examples():
    assert jaccard_mean([(0, 1, 1)], [(1, 1, 0)]) == pytest.approx(1 / 3, abs=1e-15)
    assert jaccard_mean([(1, 1, 0)], [(1, 1, 0)]) == 1.0
    assert jaccard_mean([(1, 0)], [(0, 1)]) == 0.0
    assert jaccard_mean([(0, 0)], [(0, 0)]) == 1.0


@settings(max_examples=300, deadline=None)
@given(label_pairs())
def test_metrics_match_oracles(pair):
    preds, truths = pair
    assert abs(weighted_f1(preds, truths)[0] - oracles.f1_weighted(preds, truths)) <= 1e-12
    assert abs(weighted_f1(preds, truths)[0] - float(oracles.exact_f1_weighted(preds, truths))) <= 1e-12
    assert abs(hamming_loss(preds, truths) - oracles.hamming(preds, truths)) <= 1e-12
    assert abs(jaccard_mean(preds, truths) - oracles.jaccard(preds, truths)) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(label_pairs(min_support=0))
def test_hamming_and_jaccard_symmetric(pair):
    preds, truths = pair
    assert hamming_loss(preds, truths) == hamming_loss(truths, preds)
    assert jaccard_mean(preds, truths) == jaccard_mean(truths, preds)


# AAW --------------------------------------------------------------------

VOCAB = LabelVocabulary(("Advice", "MovePeople", "News", "SearchAndRescue"))
ACT = ("MovePeople", "SearchAndRescue")


def pred(labels, score):
    return Prediction(tuple(0.0 for _ in labels), tuple(labels), score)


def test_high_priority_missed_alert():
    high, low = alert_worth([pred((1, 0, 0, 0), 0.4)], [tweet("t", [], (1, 0, 0, 0), 0.9)], VOCAB, AawConfig())
    assert high == [-1.0] and low == []


def test_high_priority_bare_alert_scores_alpha():
    high, _ = alert_worth([pred((0, 0, 0, 0), 0.8)], [tweet("t", [], (1, 0, 0, 0), 0.9)], VOCAB,
                          AawConfig(alpha=0.75))
    assert high == [0.75]


def test_low_priority_exact_alert_scores_zero():
    # An alert (score >= 0.7) with zero priority error needs the truth split above the alert cutoff.
    cfg = AawConfig(cutoff=0.7, high_priority_cutoff=0.8)
    _, low = alert_worth([pred((0, 0, 0, 0), 0.75)], [tweet("t", [], (1, 0, 0, 0), 0.75)], VOCAB, cfg)
    assert low == [0.0]


def test_truth_split_defaults_to_alert_cutoff():
    high, low = alert_worth([pred((0, 0, 0, 0), 0.75)], [tweet("t", [], (1, 0, 0, 0), 0.75)], VOCAB, AawConfig())
    assert (high, low) == ([0.75], [])


def test_all_low_priority_full_worth():
    truths = [tweet(f"t{i}", [], (1, 1, 1, 1), 0.3) for i in range(3)]
    preds = [pred((1, 1, 1, 1), 0.2) for _ in truths]
    assert aaw(preds, truths, VOCAB, AawConfig(actionable_labels=ACT)) == (0.5, 0.0)


def test_low_priority_false_alert_penalty():
    _, low = alert_worth([pred((0, 0, 0, 0), 0.9)], [tweet("t", [], (1, 0, 0, 0), 0.1)], VOCAB, AawConfig())
    assert low == [pytest.approx(-math.log(0.8 / 2 + 1))]
    _, low = alert_worth([pred((0, 0, 0, 0), 0.9)], [tweet("t", [], (1, 0, 0, 0), 0.1)], VOCAB,
                         AawConfig(delta_mode="squared-error"))
    assert low == [pytest.approx(-math.log(0.64 / 2 + 1))]


def test_default_worth_weights():
    w = AawConfig(actionable_labels=ACT).weights(VOCAB)
    assert np.array_equal(w, [0.25, 0.25, 0.25, 0.25])
    w = AawConfig(actionable_labels=("News",)).weights(VOCAB)
    assert np.allclose(w, [1 / 6, 1 / 6, 0.5, 1 / 6])


def test_worth_table_and_config_files(tmp_path):
    (tmp_path / "w.tsv").write_text("MovePeople\t0.5\n# note\nNews\t0.1\n")
    (tmp_path / "a.cfg").write_text("alpha = 0.5\ncutoff: 0.6\nactionable_labels = MovePeople, News\n"
                                    f"worth_table = {tmp_path / 'w.tsv'}\n")
    cfg = load_aaw_config(tmp_path / "a.cfg")
    assert (cfg.alpha, cfg.cutoff, cfg.actionable_labels) == (0.5, 0.6, ("MovePeople", "News"))
    assert np.array_equal(cfg.weights(VOCAB), [0.0, 0.5, 0.1, 0.0])
    (tmp_path / "bad.tsv").write_text("News 0.1\n")
    with pytest.raises(DataError):
        load_worth_table(tmp_path / "bad.tsv")
    (tmp_path / "bad.cfg").write_text("alpha = high\n")
    with pytest.raises(FormatError):
        load_aaw_config(tmp_path / "bad.cfg")
    with pytest.raises(DataError):
        AawConfig(worth_table={"News": 0.9})


def test_missing_priority_names_tweet():
    with pytest.raises(DataError, match="t42"):
        aaw([pred((0, 0, 0, 0), 0.1)], [tweet("t42", [], (1, 0, 0, 0))], VOCAB)


def test_raw_tweets_accepted_as_truth():
    truths = [RawTweet("r", "", ["News"], 0.2)]
    assert aaw([pred((0, 0, 1, 0), 0.1)], truths, VOCAB, AawConfig(actionable_labels=ACT)) == (0.125, 0.0)


@st.composite
def aaw_instances(draw):
    n = draw(st.integers(1, 12))
    bits = st.tuples(*[st.integers(0, 1)] * VOCAB.k)
    unit = st.floats(0, 1)
    preds = [pred(draw(bits), draw(unit)) for _ in range(n)]
    truths = [tweet(f"t{i}", [], draw(bits), draw(unit)) for i in range(n)]
    cfg = AawConfig(alpha=draw(unit), cutoff=draw(st.floats(0.05, 0.95)),
                    high_priority_cutoff=draw(st.none() | st.floats(0.05, 0.95)),
                    actionable_labels=draw(st.lists(st.sampled_from(VOCAB.labels), unique=True)),
                    delta_mode=draw(st.sampled_from(["abs-error", "squared-error"])))
    return preds, truths, cfg


@settings(max_examples=300, deadline=None)
@given(aaw_instances())
def test_aaw_bounds(inst):
    preds, truths, cfg = inst
    high, low = alert_worth(preds, truths, VOCAB, cfg)
    assert all(-1.0 <= v <= 1.0 for v in high + low)
    a_all, a_high = aaw(preds, truths, VOCAB, cfg)
    assert -1.0 <= a_all <= 1.0 and -1.0 <= a_high <= 1.0


@settings(max_examples=200, deadline=None)
@given(aaw_instances(), st.integers(0, 11), st.integers(0, 3))
def test_more_worth_never_lowers_aaw_high(inst, i, j):
    preds, truths, cfg = inst
    i %= len(preds)
    split_at = cfg.cutoff if cfg.high_priority_cutoff is None else cfg.high_priority_cutoff
    if truths[i].priority < split_at or preds[i].priority_score < cfg.cutoff or not truths[i].label_vector[j]:
        return
    before = aaw(preds, truths, VOCAB, cfg)[1]
    labels = list(preds[i].labels)
    labels[j] = 1
    preds = list(preds)
    preds[i] = pred(labels, preds[i].priority_score)
    assert aaw(preds, truths, VOCAB, cfg)[1] >= before


# Reports ----------------------------------------------------------------

def test_report_fields_and_round_trip(tmp_path):
    truths = [tweet("a", [], (1, 0, 0, 1), 0.9), tweet("b", [], (0, 0, 1, 0), 0.2)]
    preds = [pred((1, 0, 0, 1), 0.95), pred((0, 0, 1, 1), 0.1)]
    rep = report(preds, truths, VOCAB)
    assert rep.n_tweets == 2 and rep.aaw_all is not None
    rep.save(tmp_path / "r.json")
    assert MetricsReport.load(tmp_path / "r.json") == rep
    (tmp_path / "x.json").write_text("{}")
    with pytest.raises(FormatError):
        MetricsReport.load(tmp_path / "x.json")


def test_report_without_priorities_leaves_aaw_empty():
    rep = report([pred((1, 0, 0, 0), 0.1)], [tweet("a", [], (1, 0, 0, 0))], VOCAB)
    assert rep.aaw_all is None and rep.aaw_high is None and rep.f1_weighted == 1.0


class Memorized:
    """Checkpoint stand-in that returns the true labels."""

    vocab = VOCAB

    def predict(self, tweets, graph, actionable=()):
        return [pred(t.label_vector, 0.9) for t in tweets]


def test_evaluate_perfect_and_empty():
    tweets = [tweet(f"t{i}", [], tuple(int(b) for b in f"{i + 1:04b}"), 0.5) for i in range(5)]
    rep = evaluate(Memorized(), tweets, None)
    assert (rep.f1_weighted, rep.hamming_loss, rep.jaccard_mean) == (1.0, 0.0, 1.0)
    with pytest.raises(DataError):
        evaluate(Memorized(), [], None)
