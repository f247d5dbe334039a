from __future__ import annotations

import numpy as np
import pytest

from crisisgraph.corpusgraph import ENTITY, LABEL, WORD, CorpusGraph, GraphNode, build_graph
from crisisgraph.preprocess import ProcessedTweet, preprocess_corpus
from crisisgraph.synthetic import SyntheticSpec, make_corpus, make_embeddings


def random_graph(rng: np.random.Generator, n: int = 6, feat: int = 3, n_labels: int = 2,
                 density: float = 0.4) -> CorpusGraph:
    """Random symmetric graph with unit self-loops; the last ``n_labels`` nodes are labels."""
    upper = np.triu(rng.random((n, n)) < density, 1)
    weights = np.where(upper, rng.uniform(0.05, 1.0, (n, n)), 0.0)
    adj = weights + weights.T
    np.fill_diagonal(adj, 1.0)
    n_tokens = n - n_labels
    # One entity among the tokens when there is room, so canonical ordering sees every kind.
    kinds = [WORD] * (n_tokens - 1) + [ENTITY] if n_tokens > 1 else [WORD] * n_tokens
    kinds += [LABEL] * n_labels
    labels = tuple(f"L{j}" for j in range(n_labels))
    names = [f"w{i}" for i in range(n - n_labels)] + list(labels)
    nodes = [GraphNode(name, kind, i) for i, (name, kind) in enumerate(zip(names, kinds))]
    return CorpusGraph(nodes, adj, rng.normal(size=(n, feat)), labels)


def tweet(tid: str, tokens, bits, priority=None, entities=()) -> ProcessedTweet:
    return ProcessedTweet(tid, tuple(tokens), tuple(entities), tuple(bits), priority)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def toy():
    """4 tweets, 3 labels, 9-node graph: the smallest full-model setting."""
    spec = SyntheticSpec(n_tweets=4, k=3, cluster_size=2, tokens_per_tweet=2, seed=5)
    corpus, vocab = make_corpus(spec)
    tweets = preprocess_corpus(corpus, vocab)
    graph = build_graph(tweets, vocab, make_embeddings(spec, dim=4))
    return tweets, graph, vocab


@pytest.fixture(scope="session")
def small_run():
    """A short full-variant training run shared by checkpoint and CLI tests."""
    from crisisgraph.train import TrainConfig, train

    spec = SyntheticSpec(n_tweets=16, k=3, cluster_size=4, tokens_per_tweet=3, seed=2)
    corpus, vocab = make_corpus(spec)
    tweets = preprocess_corpus(corpus, vocab)
    graph = build_graph(tweets[:12], vocab, make_embeddings(spec, dim=8))
    cfg = TrainConfig(epochs=5, learning_rate=1e-2, encoder_dim=8, gat_hidden=4, gat_heads=2, gat_out=4,
                      relation_hidden=8, seed=3)
    result = train(tweets[:12], tweets[12:], graph, vocab, cfg)
    return result, tweets, graph, vocab


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
