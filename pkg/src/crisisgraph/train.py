"""Mini-batch training with Adam and early stopping, checkpoints, and grid search."""

from __future__ import annotations

import base64
import csv
import dataclasses
import hashlib
import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpusgraph import CorpusGraph
from .dataset import LabelVocabulary
from .diffcore import ParamStore, adam_step, bce_loss
from .encoder import MEANPOOL, Encoder, EncoderSpec
from .errors import DataError, FormatError, NumericError
from .metrics import weighted_f1
from .preprocess import ProcessedTweet
from .relnet import DEFAULT_ACTIONABLE, ENCODER_ONLY, ModelConfig, Prediction, actionable_indices, init_model, \
    model_forward, predict

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
CHECKPOINT_FORMAT = "crisisgraph-checkpoint"
UNUSED_GRAPH = "unused"
HISTORY_FIELDS = ("epoch", "train_loss", "valid_loss", "valid_f1w")
EVAL_CHUNK = 1024


class FingerprintError(DataError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 128
    learning_rate: float = 2e-5
    dropout: float = 0.25
    patience: int = 10
    seed: int = 0
    variant: str = "full"
    threshold: float = 0.5
    encoder_dim: int = 64
    gat_hidden: int = 64
    gat_heads: int = 4
    gat_out: int = 64
    relation_hidden: int = 128
    attention_slope: float = 0.2
    weighted_attention: bool = False
    pretrained_init: bool = True
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        for name in ("epochs", "batch_size", "encoder_dim", "gat_hidden", "gat_heads", "gat_out", "relation_hidden"):
            if getattr(self, name) < 1:
                raise DataError(f"{name} must be positive")
        if self.learning_rate <= 0:
            raise DataError("learning_rate must be positive")
        if self.patience < 0:
            raise DataError("patience must be >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise DataError(f"dropout {self.dropout} outside [0, 1)")
        if not 0.0 < self.threshold < 1.0:
            raise DataError(f"threshold {self.threshold} outside (0, 1)")
        self.model_config()

    def model_config(self) -> ModelConfig:
        return ModelConfig(self.variant, self.gat_hidden, self.gat_heads, self.gat_out, self.relation_hidden,
                           self.dropout, self.attention_slope, self.weighted_attention)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> TrainConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


def _encode_array(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _decode_array(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["data"], validate=True)
    return np.frombuffer(raw, dtype="<f8").reshape(d["shape"]).astype(np.float64)


@dataclass
class Checkpoint:
    vocab: LabelVocabulary
    encoder: EncoderSpec | None
    config: TrainConfig
    params: dict[str, np.ndarray]
    graph_fingerprint: str
    best_valid: float | None
    step: int
    version: int = CHECKPOINT_VERSION
    _store: ParamStore | None = field(default=None, repr=False, compare=False)
    _encoder: Encoder | None = field(default=None, repr=False, compare=False)

    @property
    def uses_graph(self) -> bool:
        return self.config.variant != ENCODER_ONLY

    def store(self) -> ParamStore:
        if self._store is None:
            self._store = ParamStore.from_arrays(self.params)
        return self._store

    def bound_encoder(self) -> Encoder | None:
        if self._encoder is None and self.encoder is not None:
            self._encoder = Encoder(self.encoder)
        return self._encoder

    def check_graph(self, graph: CorpusGraph | None) -> None:
        if not self.uses_graph:
            return
        if graph is None:
            raise FingerprintError(f"variant {self.config.variant} needs the graph it was trained on")
        fp = graph.fingerprint()
        if fp != self.graph_fingerprint:
            raise FingerprintError(f"graph fingerprint {fp[:12]} does not match checkpoint {self.graph_fingerprint[:12]}")

    def probabilities(self, tweets: Sequence[ProcessedTweet], graph: CorpusGraph | None) -> np.ndarray:
        self.check_graph(graph)
        cfg = self.config.model_config()
        chunks = [model_forward(tweets[i:i + EVAL_CHUNK], graph if self.uses_graph else None, self.store(), cfg,
                                self.bound_encoder(), self.vocab, train=False).data
                  for i in range(0, len(tweets), EVAL_CHUNK)]
        return np.concatenate(chunks, axis=0) if chunks else np.zeros((0, self.vocab.k))

    def predict(self, tweets: Sequence[ProcessedTweet], graph: CorpusGraph | None,
                actionable: Sequence[str] = DEFAULT_ACTIONABLE) -> list[Prediction]:
        idx = actionable_indices(self.vocab, actionable)
        return [predict(row, self.config.threshold, idx) for row in self.probabilities(tweets, graph)]

    def to_dict(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "version": self.version,
            "labels": list(self.vocab.labels),
            "encoder": None if self.encoder is None else self.encoder.to_dict(),
            "config": self.config.to_dict(),
            "graph_fingerprint": self.graph_fingerprint,
            "best_valid": self.best_valid,
            "step": self.step,
            "params": {name: _encode_array(self.params[name]) for name in sorted(self.params)},
        }

    def to_bytes(self) -> bytes:
        return (json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n").encode("utf-8")

    def digest(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def from_dict(cls, d: dict) -> Checkpoint:
        if d.get("format") != CHECKPOINT_FORMAT:
            raise FormatError("not an crisisgraph checkpoint")
        if d.get("version") != CHECKPOINT_VERSION:
            raise FormatError(f"checkpoint version {d.get('version')} is not supported (supported: {CHECKPOINT_VERSION})")
        try:
            return cls(
                vocab=LabelVocabulary(tuple(d["labels"])),
                encoder=None if d["encoder"] is None else EncoderSpec.from_dict(d["encoder"]),
                config=TrainConfig.from_dict(d["config"]),
                params={name: _decode_array(a) for name, a in d["params"].items()},
                graph_fingerprint=d["graph_fingerprint"],
                best_valid=d["best_valid"],
                step=int(d["step"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"corrupt checkpoint: {exc}") from None

    @classmethod
    def load(cls, path) -> Checkpoint:
        try:
            d = json.loads(Path(path).read_bytes().decode("utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise FormatError(f"{path}: corrupt or truncated checkpoint ({exc})") from None
        if not isinstance(d, dict):
            raise FormatError(f"{path}: corrupt checkpoint")
        return cls.from_dict(d)


def save_checkpoint(checkpoint: Checkpoint, path) -> None:
    checkpoint.save(path)


def load_checkpoint(path) -> Checkpoint:
    return Checkpoint.load(path)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    valid_loss: float
    valid_f1w: float


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    history: list[EpochRecord]
    stopped_early: bool = False


def write_history(history: Iterable[EpochRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_FIELDS)
        for r in history:
            w.writerow([r.epoch, repr(r.train_loss), repr(r.valid_loss), repr(r.valid_f1w)])


def read_history(path) -> list[EpochRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [EpochRecord(int(r["epoch"]), float(r["train_loss"]), float(r["valid_loss"]), float(r["valid_f1w"]))
                for r in csv.DictReader(fh)]


def _targets(tweets: Sequence[ProcessedTweet]) -> np.ndarray:
    return np.array([t.label_vector for t in tweets], dtype=np.float64)


def _validate(tweets, graph, store, mcfg, encoder, vocab, threshold) -> tuple[float, float]:
    probs = np.concatenate([
        model_forward(tweets[i:i + EVAL_CHUNK], graph, store, mcfg, encoder, vocab, train=False).data
        for i in range(0, len(tweets), EVAL_CHUNK)])
    targets = _targets(tweets)
    loss = bce_loss(probs, targets).item()
    if targets.sum() == 0:
        return loss, math.nan
    preds = (probs >= threshold).astype(np.int64)
    return loss, weighted_f1(preds, targets.astype(np.int64), vocab)[0]


def train(train_tweets: Sequence[ProcessedTweet], valid_tweets: Sequence[ProcessedTweet],
          graph: CorpusGraph | None, vocab: LabelVocabulary, config: TrainConfig,
          encoder_spec: EncoderSpec | None = None) -> TrainResult:
    """Minimize mean BCE; keep the parameters of the best validation epoch.

    Selection uses validation weighted F1, falling back to validation loss
    when the validation labels have no positives.
    """
    if not train_tweets or not valid_tweets:
        raise DataError("training needs non-empty train and validation sets")
    mcfg = config.model_config()
    uses_graph = config.variant != ENCODER_ONLY
    if uses_graph and graph is None:
        raise DataError(f"variant {config.variant} needs a graph")
    # Word vectors on the graph seed the token table, also for the encoder-only ablation.
    pretrained = graph.word_vectors() if (config.pretrained_init and graph is not None) else None
    graph = graph if uses_graph else None

    encoder = None
    if config.variant != "graph-only":
        encoder = Encoder.for_training(encoder_spec or EncoderSpec(MEANPOOL, config.encoder_dim), train_tweets)

    rng = np.random.default_rng(config.seed)
    store = init_model(ParamStore(), mcfg, encoder, graph.feature_dim if graph is not None else None, vocab.k, rng,
                       pretrained)
    Y = _targets(train_tweets)
    n = len(train_tweets)
    fingerprint = graph.fingerprint() if graph is not None else UNUSED_GRAPH

    history: list[EpochRecord] = []
    best_score, best_f1, best_params = -math.inf, None, store.arrays()
    wait, stopped_early = 0, False
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, config.batch_size):
            idx = order[lo:lo + config.batch_size]
            store.zero_grad()
            probs = model_forward([train_tweets[i] for i in idx], graph, store, mcfg, encoder, vocab,
                                  train=True, rng=rng)
            loss = bce_loss(probs, Y[idx])
            if not math.isfinite(loss.item()):
                raise NumericError(f"non-finite loss at step {store.step + 1} (epoch {epoch})")
            loss.backward()
            adam_step(store, config.learning_rate, config.beta1, config.beta2, config.adam_eps)
            total += loss.item() * len(idx)
        valid_loss, valid_f1 = _validate(valid_tweets, graph, store, mcfg, encoder, vocab, config.threshold)
        if not math.isfinite(valid_loss):
            raise NumericError(f"non-finite validation loss after step {store.step} (epoch {epoch})")
        history.append(EpochRecord(epoch, total / n, valid_loss, valid_f1))
        score = -valid_loss if math.isnan(valid_f1) else valid_f1
        log.debug("epoch %d train %.5f valid %.5f f1w %.4f", epoch, total / n, valid_loss, valid_f1)
        if score > best_score:
            best_score, best_f1, best_params, wait = score, valid_f1, store.arrays(), 0
        else:
            wait += 1
        if wait >= config.patience:
            stopped_early = epoch < config.epochs
            break

    ckpt = Checkpoint(vocab, encoder.spec if encoder is not None else None, config, best_params, fingerprint,
                      None if best_f1 is None or math.isnan(best_f1) else best_f1, store.step)
    return TrainResult(ckpt, history, stopped_early)


def expand_grid(base: TrainConfig, **axes: Sequence) -> list[TrainConfig]:
    """Cartesian product of the given field values over ``base``, in argument order."""
    names = list(axes)
    return [dataclasses.replace(base, **dict(zip(names, combo))) for combo in itertools.product(*axes.values())]


@dataclass(frozen=True)
class GridEntry:
    config: TrainConfig
    valid_f1: float
    status: str = "ok"


def grid_search(grid: Sequence[TrainConfig], train_tweets, valid_tweets, graph, vocab,
                encoder_spec: EncoderSpec | None = None) -> tuple[TrainConfig, list[GridEntry]]:
    """Train every config; leaderboard sorted by validation F1, ties and failures kept in grid order."""
    if not grid:
        raise DataError("empty configuration grid")
    entries = []
    for cfg in grid:
        try:
            result = train(train_tweets, valid_tweets, graph, vocab, cfg, encoder_spec)
            f1 = result.checkpoint.best_valid
            entries.append(GridEntry(cfg, math.nan if f1 is None else f1))
        except NumericError as exc:
            log.warning("grid entry %s aborted: %s", cfg, exc)
            entries.append(GridEntry(cfg, math.nan, f"aborted: {exc}"))
    board = sorted(entries, key=lambda e: -e.valid_f1 if not math.isnan(e.valid_f1) else math.inf)
    return board[0].config, board
