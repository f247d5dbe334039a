"""Tweet embeddings: imported vectors or a trainable mean-pool over tokens."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .diffcore import ParamStore, Tensor, matmul
from .errors import DataError, ShapeError
from .preprocess import ProcessedTweet

IMPORTED = "imported"
MEANPOOL = "trainable-meanpool"
TABLE_PARAM = "encoder.table"


@dataclass(frozen=True)
class EncoderSpec:
    kind: str = MEANPOOL
    d: int = 64
    source: str | None = None
    # Row order of the learned token table (trainable kind only).
    vocabulary: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in (IMPORTED, MEANPOOL):
            raise DataError(f"unknown encoder kind {self.kind!r}")
        if self.kind == IMPORTED and not self.source:
            raise DataError("imported encoder needs a source path")
        if self.d < 1:
            raise DataError("encoder dimension must be positive")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "d": self.d, "source": self.source, "vocabulary": list(self.vocabulary)}

    @classmethod
    def from_dict(cls, d: dict) -> EncoderSpec:
        return cls(d["kind"], int(d["d"]), d.get("source"), tuple(d.get("vocabulary", ())))


@dataclass(frozen=True)
class TweetEmbedding:
    vector: np.ndarray


def load_imported_embeddings(path) -> dict[str, np.ndarray]:
    """``tweet_id v1 ... vd`` per line; every row must have the same length."""
    table: dict[str, np.ndarray] = {}
    d = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            try:
                vec = np.array([float(v) for v in parts[1:]], dtype=np.float64)
            except ValueError:
                raise DataError(f"{path} line {lineno}: non-numeric component") from None
            if d is None:
                d = vec.size
            if vec.size != d or d == 0:
                raise DataError(f"{path} line {lineno}: dimension {vec.size}, expected {d}")
            if parts[0] in table:
                raise DataError(f"{path} line {lineno}: duplicate tweet id {parts[0]}")
            table[parts[0]] = vec
    return table


@dataclass
class Encoder:
    """Binds an EncoderSpec to its data: the token index or the imported vectors."""

    spec: EncoderSpec
    _imported: dict[str, np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self):
        self._row = {tok: i for i, tok in enumerate(self.spec.vocabulary)}

    @classmethod
    def for_training(cls, spec: EncoderSpec, tweets: Sequence[ProcessedTweet]) -> Encoder:
        if spec.kind == MEANPOOL and not spec.vocabulary:
            vocab = tuple(sorted({tok for t in tweets for tok in t.tokens}))
            spec = EncoderSpec(spec.kind, spec.d, spec.source, vocab)
        return cls(spec)

    @property
    def imported(self) -> dict[str, np.ndarray]:
        if self._imported is None:
            self._imported = load_imported_embeddings(self.spec.source)
            dims = {v.size for v in self._imported.values()}
            if dims and dims != {self.spec.d}:
                raise ShapeError(f"imported vectors have dimension {dims.pop()}, encoder expects {self.spec.d}")
        return self._imported

    def init_params(self, store: ParamStore, rng: np.random.Generator, scale: float = 0.25,
                    pretrained: dict[str, np.ndarray] | None = None) -> None:
        """Uniform init; tokens found in ``pretrained`` start from those vectors instead.

        Pretrained vectors of another width pass through a fixed Gaussian projection.
        """
        if self.spec.kind != MEANPOOL:
            return
        table = rng.uniform(-scale, scale, size=(max(1, len(self.spec.vocabulary)), self.spec.d))
        if pretrained:
            width = len(next(iter(pretrained.values())))
            proj = None
            if width != self.spec.d:
                proj = rng.normal(size=(width, self.spec.d)) / np.sqrt(width)
            for tok, row in self._row.items():
                vec = pretrained.get(tok)
                if vec is not None:
                    table[row] = vec if proj is None else vec @ proj
        store.add(TABLE_PARAM, table)

    def pooling_matrix(self, tweets: Sequence[ProcessedTweet]) -> np.ndarray:
        """Row b averages the table rows of tweet b's known tokens (repeats count)."""
        bag = np.zeros((len(tweets), max(1, len(self.spec.vocabulary))))
        for b, tweet in enumerate(tweets):
            rows = [self._row[tok] for tok in tweet.tokens if tok in self._row]
            for r in rows:
                bag[b, r] += 1.0 / len(rows)
        return bag

    def encode_batch(self, tweets: Sequence[ProcessedTweet], store: ParamStore | None) -> Tensor:
        if self.spec.kind == IMPORTED:
            rows = []
            for tweet in tweets:
                if tweet.id not in self.imported:
                    raise DataError(f"no imported embedding for tweet id {tweet.id}")
                rows.append(self.imported[tweet.id])
            return Tensor(np.array(rows).reshape(len(tweets), self.spec.d))
        table = store[TABLE_PARAM]
        if table.cols != self.spec.d:
            raise ShapeError(f"token table has width {table.cols}, encoder expects {self.spec.d}")
        return matmul(self.pooling_matrix(tweets), table)


def encode(tweet: ProcessedTweet, spec: EncoderSpec | Encoder, params: ParamStore | None) -> TweetEmbedding:
    enc = spec if isinstance(spec, Encoder) else Encoder(spec)
    return TweetEmbedding(enc.encode_batch([tweet], params).data[0].copy())
