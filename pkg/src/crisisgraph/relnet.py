"""Relation-network scoring head and the assembled model forward pass."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .corpusgraph import CorpusGraph
from .dataset import LabelVector, LabelVocabulary
from .diffcore import (ParamStore, Tensor, add, concat_rows, dropout, matmul, relu, reshape, sigmoid,
                       take_rows, transpose)
from .encoder import Encoder
from .errors import DataError, ShapeError
from .gat import GatOptions, gat_forward, init_gat, label_vectors
from .preprocess import ProcessedTweet

FULL, ENCODER_ONLY, GRAPH_ONLY = "full", "encoder-only", "graph-only"
VARIANTS = (FULL, ENCODER_ONLY, GRAPH_ONLY)

DEFAULT_ACTIONABLE = ("GoodServices", "SearchAndRescue", "MovePeople", "EmergingThreats",
                      "SignificantEventChange", "ServiceAvailable")


@dataclass
class RelationParams:
    W1: Tensor  # hidden x (tweet dim + label dim)
    b1: Tensor  # 1 x hidden
    W2: Tensor  # 1 x hidden
    b2: Tensor  # 1 x 1

    def __post_init__(self):
        h = self.W1.rows
        if self.b1.shape != (1, h) or self.W2.shape != (1, h) or self.b2.shape != (1, 1):
            raise ShapeError("relation network parameter shapes are inconsistent")

    @classmethod
    def from_store(cls, store: ParamStore) -> RelationParams:
        return cls(store["rel.W1"], store["rel.b1"], store["rel.W2"], store["rel.b2"])

    @staticmethod
    def init(store: ParamStore, in_dim: int, hidden: int, rng: np.random.Generator) -> RelationParams:
        lim1 = np.sqrt(6.0 / (in_dim + hidden))
        lim2 = np.sqrt(6.0 / (hidden + 1))
        store.add("rel.W1", rng.uniform(-lim1, lim1, size=(hidden, in_dim)))
        store.add("rel.b1", np.zeros((1, hidden)))
        store.add("rel.W2", rng.uniform(-lim2, lim2, size=(1, hidden)))
        store.add("rel.b2", np.zeros((1, 1)))
        return RelationParams.from_store(store)


@dataclass(frozen=True)
class Prediction:
    probs: tuple[float, ...]
    labels: LabelVector
    priority_score: float


@dataclass(frozen=True)
class ModelConfig:
    variant: str = FULL
    gat_hidden: int = 64
    gat_heads: int = 4
    gat_out: int = 64
    relation_hidden: int = 128
    dropout: float = 0.25
    attention_slope: float = 0.2
    weighted_attention: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise DataError(f"unknown variant {self.variant!r}; expected one of {', '.join(VARIANTS)}")

    @property
    def gat_options(self) -> GatOptions:
        return GatOptions(self.dropout, self.attention_slope, self.weighted_attention)

    def to_dict(self) -> dict:
        return asdict(self)


def relate(tau: Tensor, iota: Tensor, params: RelationParams, train: bool = False,
           rng: np.random.Generator | None = None, rate: float = 0.0) -> Tensor:
    """Score every (tweet, label) pair: sigmoid(W2 relu(W1 [tau_b ; iota_j] + b1) + b2).

    Returns batch x k. Labels are scored independently of one another.
    """
    B, k = tau.rows, iota.rows
    if tau.cols + iota.cols != params.W1.cols:
        raise ShapeError(f"tweet dim {tau.cols} + label dim {iota.cols} != relation input {params.W1.cols}")
    z = concat_rows(take_rows(tau, np.repeat(np.arange(B), k)), take_rows(iota, np.tile(np.arange(k), B)))
    hidden = relu(add(matmul(z, transpose(params.W1), sequential=True), params.b1))
    hidden = dropout(hidden, rate, rng, train)
    logits = add(matmul(hidden, transpose(params.W2), sequential=True), params.b2)
    return reshape(sigmoid(logits), B, k)


def priority_score(probs: Sequence[float], actionable_idx: Sequence[int]) -> float:
    """Highest probability among the actionable labels, or among all labels if none are actionable."""
    probs = np.asarray(probs, dtype=np.float64)
    pool = probs[list(actionable_idx)] if len(actionable_idx) else probs
    return float(pool.max()) if pool.size else 0.0


def predict(probs: Sequence[float], threshold: float = 0.5, actionable_idx: Sequence[int] = ()) -> Prediction:
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold {threshold} outside (0, 1)")
    probs = tuple(float(p) for p in probs)
    labels = tuple(int(p >= threshold) for p in probs)
    return Prediction(probs, labels, priority_score(probs, actionable_idx))


def actionable_indices(vocab: LabelVocabulary, actionable: Sequence[str] = DEFAULT_ACTIONABLE) -> list[int]:
    return [vocab.index(name) for name in actionable if name in vocab]


def init_model(store: ParamStore, cfg: ModelConfig, encoder: Encoder | None, feature_dim: int | None,
               k: int, rng: np.random.Generator, pretrained: dict[str, np.ndarray] | None = None) -> ParamStore:
    if cfg.variant in (FULL, ENCODER_ONLY):
        if encoder is None:
            raise DataError(f"variant {cfg.variant} needs an encoder")
        encoder.init_params(store, rng, pretrained=pretrained)
    if cfg.variant in (FULL, GRAPH_ONLY):
        if feature_dim is None:
            raise DataError(f"variant {cfg.variant} needs a graph")
        init_gat(store, feature_dim, cfg.gat_hidden, cfg.gat_heads, cfg.gat_out, rng)
    if cfg.variant == FULL:
        RelationParams.init(store, encoder.spec.d + cfg.gat_out, cfg.relation_hidden, rng)
    elif cfg.variant == GRAPH_ONLY:
        RelationParams.init(store, 2 * cfg.gat_out, cfg.relation_hidden, rng)
    else:
        lim = np.sqrt(6.0 / (encoder.spec.d + k))
        store.add("head.W", rng.uniform(-lim, lim, size=(k, encoder.spec.d)))
        store.add("head.b", np.zeros((1, k)))
    return store


def graph_pooling_matrix(tweets: Sequence[ProcessedTweet], graph: CorpusGraph) -> np.ndarray:
    pool = np.zeros((len(tweets), graph.n))
    for b, tweet in enumerate(tweets):
        idx = graph.token_indices(tweet)
        for i in idx:
            pool[b, i] += 1.0 / len(idx)
    return pool


def model_forward(tweets: Sequence[ProcessedTweet], graph: CorpusGraph | None, store: ParamStore,
                  cfg: ModelConfig, encoder: Encoder | None, vocab: LabelVocabulary | None = None,
                  train: bool = False, rng: np.random.Generator | None = None) -> Tensor:
    """Label probabilities for a batch of tweets, shape batch x k."""
    if cfg.variant == ENCODER_ONLY:
        tau = encoder.encode_batch(tweets, store)
        tau = dropout(tau, cfg.dropout, rng, train)
        return sigmoid(add(matmul(tau, transpose(store["head.W"])), store["head.b"]))

    if graph is None:
        raise DataError(f"variant {cfg.variant} needs a graph")
    H2 = gat_forward(graph, store, train, rng, cfg.gat_options)
    iota = label_vectors(H2, graph, vocab)
    if cfg.variant == FULL:
        tau = encoder.encode_batch(tweets, store)
    else:
        tau = matmul(graph_pooling_matrix(tweets, graph), H2)
    return relate(tau, iota, RelationParams.from_store(store), train, rng, cfg.dropout)
