"""Two-layer graph attention over the corpus graph; label rows become label embeddings."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpusgraph import CorpusGraph
from .dataset import LabelVocabulary
from .diffcore import (ParamStore, Tensor, add, concat_rows, dropout, elu, leaky_relu, matmul, mul,
                       softmax_rows, take_rows, transpose)
from .errors import ShapeError


@dataclass
class GatLayerParams:
    W: list[Tensor]  # per head, out x in
    a: list[Tensor]  # per head, (2 * out) x 1: source half then neighbour half

    def __post_init__(self):
        if not self.W or len(self.W) != len(self.a):
            raise ShapeError("need one W and one attention vector per head")
        for W, a in zip(self.W, self.a):
            if a.shape != (2 * W.rows, 1):
                raise ShapeError(f"attention vector {a.shape} does not match W {W.shape}")

    @property
    def heads(self) -> int:
        return len(self.W)

    @property
    def out_dim(self) -> int:
        return self.W[0].rows

    @classmethod
    def from_store(cls, store: ParamStore, prefix: str) -> GatLayerParams:
        heads = sorted(int(n[len(prefix) + 2:]) for n in store if n.startswith(f"{prefix}.W"))
        return cls([store[f"{prefix}.W{h}"] for h in heads], [store[f"{prefix}.a{h}"] for h in heads])

    @staticmethod
    def init(store: ParamStore, prefix: str, in_dim: int, out_dim: int, heads: int,
             rng: np.random.Generator) -> GatLayerParams:
        for h in range(heads):
            lim_w = np.sqrt(6.0 / (in_dim + out_dim))
            lim_a = np.sqrt(6.0 / (2 * out_dim + 1))
            store.add(f"{prefix}.W{h}", rng.uniform(-lim_w, lim_w, size=(out_dim, in_dim)))
            store.add(f"{prefix}.a{h}", rng.uniform(-lim_a, lim_a, size=(2 * out_dim, 1)))
        return GatLayerParams.from_store(store, prefix)


@dataclass(frozen=True)
class GatOptions:
    dropout: float = 0.25
    slope: float = 0.2
    weighted: bool = False


def gat_layer(H: Tensor, graph: CorpusGraph, params: GatLayerParams, train: bool = False,
              rng: np.random.Generator | None = None, final: bool = False,
              opts: GatOptions = GatOptions()) -> tuple[Tensor, list[np.ndarray]]:
    """One attention layer. Hidden layers concatenate ELU'd heads; the final layer averages heads linearly.

    Reductions run in the graph's canonical node order, so relabeling nodes
    permutes the output exactly.
    """
    if H.rows != graph.n:
        raise ShapeError(f"feature rows {H.rows} != node count {graph.n}")
    if H.cols != params.W[0].cols:
        raise ShapeError(f"feature width {H.cols} != layer input {params.W[0].cols}")
    order = graph.canonical_order
    mask = graph.mask
    bias = None
    if opts.weighted:
        bias = np.where(mask, np.log(np.where(mask, graph.adjacency, 1.0)), 0.0)

    Hd = dropout(H, opts.dropout, rng, train)
    outs, alphas = [], []
    for W, a in zip(params.W, params.a):
        f = W.rows
        Wh = matmul(Hd, transpose(W), sequential=True)
        src = matmul(Wh, take_rows(a, range(f)), sequential=True)
        dst = matmul(Wh, take_rows(a, range(f, 2 * f)), sequential=True)
        scores = leaky_relu(add(src, transpose(dst)), opts.slope)
        if bias is not None:
            scores = add(scores, bias)
        alpha = softmax_rows(scores, mask, order)
        alphas.append(alpha.data)
        out = matmul(dropout(alpha, opts.dropout, rng, train), Wh, sequential=True, order=order)
        outs.append(out if final else elu(out))
    if final:
        total = outs[0]
        for o in outs[1:]:
            total = add(total, o)
        return (total if len(outs) == 1 else mul(total, 1.0 / len(outs))), alphas
    return concat_rows(*outs), alphas


def gat_forward(graph: CorpusGraph, store: ParamStore, train: bool = False,
                rng: np.random.Generator | None = None, opts: GatOptions = GatOptions()) -> Tensor:
    H = Tensor(graph.features)
    hidden, _ = gat_layer(H, graph, GatLayerParams.from_store(store, "gat1"), train, rng, final=False, opts=opts)
    out, _ = gat_layer(hidden, graph, GatLayerParams.from_store(store, "gat2"), train, rng, final=True, opts=opts)
    return out


def init_gat(store: ParamStore, in_dim: int, hidden: int, heads: int, out_dim: int,
             rng: np.random.Generator) -> None:
    GatLayerParams.init(store, "gat1", in_dim, hidden, heads, rng)
    GatLayerParams.init(store, "gat2", hidden * heads, out_dim, 1, rng)


def label_vectors(H2: Tensor, graph: CorpusGraph, vocab: LabelVocabulary | Sequence[str] | None = None) -> Tensor:
    return take_rows(H2, graph.label_indices(vocab))
