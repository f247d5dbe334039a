"""Synthetic labeled tweet corpora with label-correlated vocabulary.

Each label owns a cluster of tokens; a tweet draws most of its tokens from the
clusters of its labels plus optional shared filler. Matching embedding tables
place each cluster around its own random centre.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpusgraph import EmbeddingTable
from .dataset import LabelVocabulary, RawTweet

LABEL_POOL = ("EmergingThreats", "News", "SearchAndRescue", "Advice", "MovePeople", "Sentiment",
              "Donations", "Location", "GoodServices", "Hashtags", "MultimediaShare", "Weather")
ACTIONABLE_POOL = {"EmergingThreats", "SearchAndRescue", "MovePeople", "GoodServices"}


@dataclass(frozen=True)
class SyntheticSpec:
    n_tweets: int = 12
    k: int = 3
    cluster_size: int = 6
    tokens_per_tweet: int = 4
    second_label_prob: float = 0.0
    filler_vocab: int = 0
    filler_per_tweet: int = 0
    seed: int = 0


def cluster_token(label_idx: int, j: int) -> str:
    return f"c{label_idx}tok{j}"


def filler_token(j: int) -> str:
    return f"filler{j}"


def make_corpus(spec: SyntheticSpec = SyntheticSpec()) -> tuple[list[RawTweet], LabelVocabulary]:
    if spec.k > len(LABEL_POOL):
        raise ValueError(f"at most {len(LABEL_POOL)} synthetic labels")
    rng = np.random.default_rng(spec.seed)
    names = LABEL_POOL[:spec.k]
    corpus = []
    for i in range(spec.n_tweets):
        first = i % spec.k  # round robin keeps every label supported
        labels = {first}
        if spec.k > 1 and rng.random() < spec.second_label_prob:
            labels.add(int(rng.choice([j for j in range(spec.k) if j != first])))
        toks = []
        for j in range(spec.tokens_per_tweet):
            lab = sorted(labels)[j % len(labels)]
            toks.append(cluster_token(lab, int(rng.integers(spec.cluster_size))))
        if spec.filler_vocab:
            toks += [filler_token(int(rng.integers(spec.filler_vocab))) for _ in range(spec.filler_per_tweet)]
        rng.shuffle(toks)
        label_names = sorted(names[j] for j in labels)
        actionable = any(n in ACTIONABLE_POOL for n in label_names)
        priority = float(rng.uniform(0.7, 1.0) if actionable else rng.uniform(0.0, 0.69))
        corpus.append(RawTweet(f"t{i:04d}", " ".join(toks), label_names, round(priority, 4)))
    return corpus, LabelVocabulary.from_labels(names)


def make_embeddings(spec: SyntheticSpec, dim: int = 16, spread: float = 0.3, seed: int | None = None) -> EmbeddingTable:
    rng = np.random.default_rng(spec.seed + 1 if seed is None else seed)
    vectors = {}
    for c in range(spec.k):
        centre = rng.normal(size=dim)
        for j in range(spec.cluster_size):
            vectors[cluster_token(c, j)] = centre + spread * rng.normal(size=dim)
    for j in range(spec.filler_vocab):
        vectors[filler_token(j)] = rng.normal(size=dim)
    return EmbeddingTable(dim, vectors)
