"""Reproducible experiment recipes on synthetic corpora (overfit check, variant ablation)."""

from __future__ import annotations

from dataclasses import dataclass

from .corpusgraph import build_graph
from .dataset import make_split, select
from .metrics import weighted_f1
from .preprocess import preprocess_corpus
from .relnet import VARIANTS
from .synthetic import SyntheticSpec, make_corpus, make_embeddings
from .train import TrainConfig, train

OVERFIT_DATA = SyntheticSpec(n_tweets=12, k=3, cluster_size=6, tokens_per_tweet=4)
ABLATION_DATA = SyntheticSpec(n_tweets=80, k=4, cluster_size=10, tokens_per_tweet=4, second_label_prob=0.3,
                              filler_vocab=20, filler_per_tweet=2)


@dataclass(frozen=True)
class OverfitResult:
    seed: int
    train_f1: float
    epochs: int
    final_loss: float


def overfit_run(seed: int, epochs: int = 200) -> OverfitResult:
    """Train on 12 tweets / 3 labels with d=16 and score on the training set itself."""
    spec = SyntheticSpec(**{**OVERFIT_DATA.__dict__, "seed": seed})
    corpus, vocab = make_corpus(spec)
    tweets = preprocess_corpus(corpus, vocab)
    graph = build_graph(tweets, vocab, make_embeddings(spec, dim=16))
    cfg = TrainConfig(epochs=epochs, learning_rate=1e-2, encoder_dim=16, patience=epochs, seed=seed)
    result = train(tweets, tweets, graph, vocab, cfg)
    preds = result.checkpoint.predict(tweets, graph)
    f1, _ = weighted_f1([p.labels for p in preds], [t.label_vector for t in tweets], vocab)
    return OverfitResult(seed, f1, len(result.history), result.history[-1].train_loss)


def ablation_run(seed: int, epochs: int = 200, patience: int = 30) -> dict[str, float]:
    """Best validation weighted F1 of each variant on one seeded synthetic split."""
    spec = SyntheticSpec(**{**ABLATION_DATA.__dict__, "seed": seed})
    corpus, vocab = make_corpus(spec)
    tweets = preprocess_corpus(corpus, vocab)
    split = make_split(tweets, seed=seed)
    tr, va = select(tweets, split.train), select(tweets, split.valid)
    graph = build_graph(tr, vocab, make_embeddings(spec))
    scores = {}
    for variant in VARIANTS:
        cfg = TrainConfig(epochs=epochs, learning_rate=1e-2, encoder_dim=16, patience=patience,
                          seed=seed, variant=variant)
        scores[variant] = train(tr, va, graph, vocab, cfg).checkpoint.best_valid
    return scores
