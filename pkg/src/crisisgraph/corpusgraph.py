"""Word / entity / label graph built from a preprocessed corpus.

Words and entities that share a sliding window are joined with a weight
from their PMI (clamped at 0); tokens join the labels of the tweets they
occur in with a tf-idf style weight. Labels never connect to each other.
Each edge family is min-max scaled into [edge_floor, 1] as a whole, which
keeps A exactly symmetric, and unit self-loops are added last.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import LabelVocabulary
from .errors import DataError, FormatError
from .preprocess import Gazetteer, ProcessedTweet, entity_spans

WORD, ENTITY, LABEL = "word", "entity", "label"
_KIND_RANK = {WORD: 0, ENTITY: 1, LABEL: 2}
GRAPH_FORMAT = "crisisgraph-graph/1"


@dataclass(frozen=True)
class GraphNode:
    name: str
    kind: str
    index: int


@dataclass(frozen=True)
class GraphBuildOptions:
    min_freq: int = 1
    window: int = 5
    seed: int = 0
    init_scale: float = 0.25
    edge_floor: float = 0.05

    def __post_init__(self):
        if self.min_freq < 1 or self.window < 1:
            raise DataError("min_freq and window must be >= 1")
        if not 0.0 < self.edge_floor <= 1.0:
            raise DataError("edge_floor must lie in (0, 1]")


@dataclass
class EmbeddingTable:
    dim: int
    vectors: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.vectors = {k.lower(): np.asarray(v, dtype=np.float64) for k, v in self.vectors.items()}
        for tok, vec in self.vectors.items():
            if vec.shape != (self.dim,):
                raise DataError(f"embedding for {tok!r} has length {vec.size}, expected {self.dim}")

    def get(self, token: str) -> np.ndarray | None:
        return self.vectors.get(token.lower())

    def __contains__(self, token: str) -> bool:
        return token.lower() in self.vectors


def load_embeddings(path) -> EmbeddingTable:
    """GloVe text layout: ``token v1 ... vF``; the first occurrence of a token wins."""
    vectors: dict[str, np.ndarray] = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if not line.strip():
                continue
            try:
                vec = np.array([float(v) for v in parts[1:]], dtype=np.float64)
            except ValueError:
                raise DataError(f"{path} line {lineno}: non-numeric embedding component") from None
            if dim is None:
                dim = vec.size
            if vec.size != dim or dim == 0:
                raise DataError(f"{path} line {lineno}: expected {dim} components, got {vec.size}")
            vectors.setdefault(parts[0].lower(), vec)
    if dim is None:
        raise DataError(f"{path}: no embeddings")
    return EmbeddingTable(dim, vectors)


@dataclass(eq=False)
class CorpusGraph:
    nodes: list[GraphNode]
    adjacency: np.ndarray
    features: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self):
        n = len(self.nodes)
        if self.adjacency.shape != (n, n) or self.features.shape[0] != n:
            raise DataError("graph arrays disagree with node count")
        if [nd.index for nd in self.nodes] != list(range(n)):
            raise DataError("node indices must be dense 0..N-1 in list order")

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @cached_property
    def mask(self) -> np.ndarray:
        return self.adjacency > 0

    @cached_property
    def canonical_order(self) -> np.ndarray:
        """Node indices sorted by (kind, name); stable under any relabeling."""
        return np.array(sorted(range(self.n), key=lambda i: (_KIND_RANK[self.nodes[i].kind], self.nodes[i].name)),
                        dtype=np.intp)

    @cached_property
    def lookup(self) -> dict[tuple[str, str], int]:
        return {(nd.kind, nd.name): nd.index for nd in self.nodes}

    def label_indices(self, vocab: LabelVocabulary | Sequence[str] | None = None) -> list[int]:
        names = self.labels if vocab is None else tuple(vocab)
        try:
            return [self.lookup[(LABEL, name)] for name in names]
        except KeyError as exc:
            raise DataError(f"graph has no node for label {exc.args[0][1]}") from None

    def token_indices(self, tweet: ProcessedTweet) -> list[int]:
        """Graph rows for a tweet's words and entities; tokens outside the graph are skipped."""
        out = [self.lookup[(WORD, t)] for t in tweet.tokens if (WORD, t) in self.lookup]
        out += [self.lookup[(ENTITY, e)] for e in tweet.entities if (ENTITY, e) in self.lookup]
        return out

    def word_vectors(self) -> dict[str, np.ndarray]:
        return {nd.name: self.features[nd.index] for nd in self.nodes if nd.kind == WORD}

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps([[nd.name, nd.kind] for nd in self.nodes], ensure_ascii=False).encode())
        h.update(json.dumps(list(self.labels)).encode())
        h.update(np.ascontiguousarray(self.adjacency, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.features, dtype="<f8").tobytes())
        return h.hexdigest()

    def permuted(self, perm: Sequence[int]) -> CorpusGraph:
        """Graph with old node ``perm[i]`` moved to position ``i``."""
        perm = np.asarray(perm, dtype=np.intp)
        nodes = [GraphNode(self.nodes[p].name, self.nodes[p].kind, i) for i, p in enumerate(perm)]
        return CorpusGraph(nodes, self.adjacency[np.ix_(perm, perm)].copy(), self.features[perm].copy(),
                           self.labels)

    def edges(self) -> list[tuple[int, int, float]]:
        rows, cols = np.nonzero(self.adjacency)
        return [(int(i), int(j), float(self.adjacency[i, j])) for i, j in zip(rows, cols)]

    def to_dict(self) -> dict:
        return {
            "format": GRAPH_FORMAT,
            "fingerprint": self.fingerprint(),
            "labels": list(self.labels),
            "nodes": [{"name": nd.name, "kind": nd.kind} for nd in self.nodes],
            "edges": [[i, j, w] for i, j, w in self.edges()],
            "features": self.features.tolist(),
        }

    def save(self, path) -> str:
        Path(path).write_text(json.dumps(self.to_dict(), ensure_ascii=False) + "\n", encoding="utf-8")
        return self.fingerprint()

    @classmethod
    def from_dict(cls, d: dict) -> CorpusGraph:
        if d.get("format") != GRAPH_FORMAT:
            raise FormatError(f"unsupported graph format {d.get('format')!r}, expected {GRAPH_FORMAT!r}")
        nodes = [GraphNode(nd["name"], nd["kind"], i) for i, nd in enumerate(d["nodes"])]
        n = len(nodes)
        adj = np.zeros((n, n))
        for i, j, w in d["edges"]:
            adj[i, j] = w
        feats = np.array(d["features"], dtype=np.float64).reshape(n, -1)
        graph = cls(nodes, adj, feats, tuple(d["labels"]))
        if d.get("fingerprint") and d["fingerprint"] != graph.fingerprint():
            raise FormatError("graph file content does not match its recorded fingerprint")
        return graph

    @classmethod
    def load(cls, path) -> CorpusGraph:
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, FormatError):
                raise
            raise FormatError(f"{path}: not a graph file ({exc})") from None


def neighborhood(graph: CorpusGraph, i: int) -> set[int]:
    if not 0 <= i < graph.n:
        raise IndexError(f"node index {i} outside 0..{graph.n - 1}")
    return set(np.flatnonzero(graph.adjacency[i] > 0).tolist())


def _tweet_units(tweet: ProcessedTweet, entity_set: set[str]) -> list[tuple[int, tuple[str, str]]]:
    """(position, node key) pairs; entities sit at the start of their token span."""
    units = [(pos, (WORD, tok)) for pos, tok in enumerate(tweet.tokens)]
    if tweet.entities:
        gaz = Gazetteer(frozenset(tuple(e.split()) for e in tweet.entities))
        for a, b in entity_spans(tweet.tokens, gaz):
            name = " ".join(tweet.tokens[a:b])
            if name in entity_set:
                units.append((a, (ENTITY, name)))
    return units


def build_graph(corpus: Sequence[ProcessedTweet], vocab: LabelVocabulary, table: EmbeddingTable,
                opts: GraphBuildOptions | None = None) -> CorpusGraph:
    opts = opts or GraphBuildOptions()
    if not corpus:
        raise DataError("cannot build a graph from an empty corpus")
    if table.dim <= 0:
        raise DataError("embedding dimension must be positive")

    token_freq = Counter(tok for t in corpus for tok in t.tokens)
    words = sorted(tok for tok, c in token_freq.items() if c >= opts.min_freq)
    entities = sorted({e for t in corpus for e in t.entities})
    keys = [(WORD, w) for w in words] + [(ENTITY, e) for e in entities] + [(LABEL, lab) for lab in vocab.labels]
    index = {key: i for i, key in enumerate(keys)}
    n = len(keys)
    word_set, entity_set = set(words), set(entities)

    # Sliding-window co-occurrence counts over words and entities.
    n_windows = 0
    single: Counter = Counter()
    pair: Counter = Counter()
    doc_freq: Counter = Counter()
    label_count: Counter = Counter()
    for tweet in corpus:
        units = [(pos, index[key]) for pos, key in _tweet_units(tweet, entity_set)
                 if key[0] == ENTITY or key[1] in word_set]
        n_tok = len(tweet.tokens)
        starts = [0] if n_tok <= opts.window else range(n_tok - opts.window + 1)
        if n_tok:
            for s in starts:
                members = sorted({i for pos, i in units if s <= pos < s + opts.window})
                n_windows += 1
                single.update(members)
                pair.update(combinations(members, 2))
        present = sorted({i for _, i in units})
        doc_freq.update(present)
        labels_here = [index[(LABEL, lab)] for lab, bit in zip(vocab.labels, tweet.label_vector) if bit]
        for i in present:
            for j in labels_here:
                label_count[(i, j)] += 1

    adj = np.zeros((n, n))
    ww_pairs = [(i, j, max(0.0, math.log(c * n_windows / (single[i] * single[j])))) for (i, j), c in pair.items()]
    s = len(corpus)
    tl_pairs = [(i, j, max(0.0, c * math.log(s / doc_freq[i]))) for (i, j), c in label_count.items()]
    for family in (ww_pairs, tl_pairs):
        if not family:
            continue
        scores = np.array([w for _, _, w in family])
        lo, hi = scores.min(), scores.max()
        scaled = np.ones_like(scores) if hi == lo else opts.edge_floor + (1.0 - opts.edge_floor) * (scores - lo) / (hi - lo)
        for (i, j, _), w in zip(family, scaled):
            adj[i, j] = adj[j, i] = w
    np.fill_diagonal(adj, 1.0)

    rng = np.random.default_rng(opts.seed)
    feats = rng.uniform(-opts.init_scale, opts.init_scale, size=(n, table.dim))
    for (kind, name), i in index.items():
        if kind == WORD:
            vec = table.get(name)
        elif kind == ENTITY:
            vec = table.get(name.replace(" ", "_"))
            if vec is None:
                parts = [table.get(p) for p in name.split()]
                parts = [p for p in parts if p is not None]
                vec = np.mean(parts, axis=0) if parts else None
        else:
            vec = None
        if vec is not None:
            feats[i] = vec

    nodes = [GraphNode(name, kind, i) for i, (kind, name) in enumerate(keys)]
    return CorpusGraph(nodes, adj, feats, vocab.labels)
