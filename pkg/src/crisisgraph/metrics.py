"""Multi-label evaluation: weighted F1, Hamming loss, Jaccard and Accumulated Alert Worth."""

from __future__ import annotations

import configparser
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import LabelVocabulary, encode_labels
from .errors import DataError, FormatError
from .relnet import DEFAULT_ACTIONABLE, Prediction

DELTA_MODES = ("abs-error", "squared-error")


def _as_matrix(rows, name: str) -> np.ndarray:
    arr = np.asarray([tuple(r) for r in rows], dtype=np.int64)
    if arr.ndim != 2:
        raise DataError(f"{name}: expected a list of equal-length label vectors")
    return arr


def _pair(preds, truths) -> tuple[np.ndarray, np.ndarray]:
    if len(preds) != len(truths):
        raise DataError(f"length mismatch: {len(preds)} predictions vs {len(truths)} truths")
    if len(preds) == 0:
        raise DataError("no instances to score")
    P, T = _as_matrix(preds, "preds"), _as_matrix(truths, "truths")
    if P.shape != T.shape:
        raise DataError(f"label vector shapes differ: {P.shape} vs {T.shape}")
    return P, T


@dataclass(frozen=True)
class LabelScore:
    precision: float
    recall: float
    f1: float
    support: int


def weighted_f1(preds, truths, vocab: LabelVocabulary | None = None) -> tuple[float, dict[str, LabelScore]]:
    """Support-weighted mean of per-label F1; weights are support over total positive assignments."""
    P, T = _pair(preds, truths)
    names = vocab.labels if vocab is not None else tuple(str(j) for j in range(P.shape[1]))
    if len(names) != P.shape[1]:
        raise DataError(f"vocabulary has {len(names)} labels, vectors have {P.shape[1]}")
    support = T.sum(axis=0)
    total = int(support.sum())
    if total == 0:
        raise DataError("no support: ground truth has no positive labels")
    tp = (P & T).sum(axis=0)
    pred_pos = P.sum(axis=0)
    per_label = {}
    score = 0.0
    for j, name in enumerate(names):
        prec = tp[j] / pred_pos[j] if pred_pos[j] else 0.0
        rec = tp[j] / support[j] if support[j] else 0.0
        f1 = 2.0 * prec * rec / (prec + rec) if prec + rec > 0 else 0.0
        per_label[name] = LabelScore(float(prec), float(rec), float(f1), int(support[j]))
        score += (support[j] / total) * f1
    return float(score), per_label


def hamming_loss(preds, truths, k: int | None = None) -> float:
    P, T = _pair(preds, truths)
    k = P.shape[1] if k is None else k
    if k != P.shape[1]:
        raise DataError(f"k={k} but vectors have length {P.shape[1]}")
    return float(np.mean((P ^ T).sum(axis=1) / k))


def jaccard_mean(preds, truths) -> float:
    P, T = _pair(preds, truths)
    inter = (P & T).sum(axis=1)
    union = (P | T).sum(axis=1)
    per = np.where(union == 0, 1.0, inter / np.maximum(union, 1))
    return float(per.mean())


@dataclass
class AawConfig:
    alpha: float = 0.75
    cutoff: float = 0.7
    actionable_labels: tuple[str, ...] = DEFAULT_ACTIONABLE
    worth_table: dict[str, float] | None = None
    delta_mode: str = "abs-error"
    # Truth priority splitting high from low tweets; None reuses the alert cutoff.
    high_priority_cutoff: float | None = None

    def __post_init__(self):
        self.actionable_labels = tuple(self.actionable_labels)
        if not 0.0 <= self.alpha <= 1.0:
            raise DataError(f"alpha {self.alpha} outside [0, 1]")
        for name in ("cutoff", "high_priority_cutoff"):
            value = getattr(self, name)
            if value is not None and not 0.0 < value < 1.0:
                raise DataError(f"{name} {value} outside (0, 1)")
        if self.delta_mode not in DELTA_MODES:
            raise DataError(f"unknown delta_mode {self.delta_mode!r}; expected one of {DELTA_MODES}")
        if self.worth_table is not None:
            for name, w in self.worth_table.items():
                if not 0.0 <= w <= 0.5:
                    raise DataError(f"worth weight for {name} = {w} outside [0, 0.5]")

    def weights(self, vocab: LabelVocabulary) -> np.ndarray:
        """Per-label worth; by default each group (actionable / not) shares 0.5 uniformly."""
        if self.worth_table is not None:
            return np.array([self.worth_table.get(name, 0.0) for name in vocab.labels])
        act = np.array([name in self.actionable_labels for name in vocab.labels], dtype=bool)
        w = np.zeros(vocab.k)
        if act.any():
            w[act] = 0.5 / act.sum()
        if (~act).any():
            w[~act] = 0.5 / (~act).sum()
        return w


def load_worth_table(path) -> dict[str, float]:
    table = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.rstrip("\n").split("\t")
            try:
                table[parts[0]] = float(parts[1])
            except (IndexError, ValueError):
                raise DataError(f"{path} line {lineno}: expected 'label<TAB>weight'") from None
    return table


def read_key_values(path) -> dict[str, str]:
    """Flat ``key = value`` file (``#`` comments) read through configparser."""
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=", ":"))
    parser.optionxform = str
    try:
        parser.read_string("[root]\n" + Path(path).read_text(encoding="utf-8"), source=str(path))
    except configparser.Error as exc:
        raise FormatError(f"{path}: {exc}") from None
    return dict(parser["root"])


def load_aaw_config(path, worth_table_path=None) -> AawConfig:
    kv = read_key_values(path)
    kwargs: dict = {}
    try:
        if "alpha" in kv:
            kwargs["alpha"] = float(kv["alpha"])
        if "cutoff" in kv:
            kwargs["cutoff"] = float(kv["cutoff"])
        if "actionable_labels" in kv:
            kwargs["actionable_labels"] = tuple(x.strip() for x in kv["actionable_labels"].split(",") if x.strip())
        if "delta_mode" in kv:
            kwargs["delta_mode"] = kv["delta_mode"]
        if "high_priority_cutoff" in kv:
            kwargs["high_priority_cutoff"] = float(kv["high_priority_cutoff"])
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    table_path = worth_table_path or kv.get("worth_table")
    if table_path:
        kwargs["worth_table"] = load_worth_table(table_path)
    return AawConfig(**kwargs)


def _truth_bits(t, vocab: LabelVocabulary) -> np.ndarray:
    if hasattr(t, "label_vector"):
        return np.asarray(t.label_vector, dtype=np.int64)
    return np.asarray(encode_labels(t, vocab), dtype=np.int64)


def _delta(system: float, truth: float, mode: str) -> float:
    err = abs(system - truth)
    return err if mode == "abs-error" else err * err


def alert_worth(preds: Sequence[Prediction], truths: Sequence, vocab: LabelVocabulary,
                cfg: AawConfig) -> tuple[list[float], list[float]]:
    """Per-tweet hPW values (high-priority tweets) and lPW values (the rest)."""
    if len(preds) != len(truths):
        raise DataError(f"length mismatch: {len(preds)} predictions vs {len(truths)} truths")
    weights = cfg.weights(vocab)
    act = np.array([name in cfg.actionable_labels for name in vocab.labels], dtype=bool)
    split_at = cfg.cutoff if cfg.high_priority_cutoff is None else cfg.high_priority_cutoff
    high, low = [], []
    for pred, truth in zip(preds, truths):
        if truth.priority is None:
            raise DataError(f"tweet {truth.id} has no priority annotation")
        tp = np.asarray(pred.labels, dtype=np.int64) & _truth_bits(truth, vocab)
        phi = min(0.5, float(np.sum(weights[act] * tp[act])))
        phi_hat = min(0.5, float(np.sum(weights[~act] * tp[~act])))
        alerted = pred.priority_score >= cfg.cutoff
        if truth.priority >= split_at:
            high.append(cfg.alpha + (1.0 - cfg.alpha) * (phi + phi_hat) if alerted else -1.0)
        else:
            if alerted:
                delta = _delta(pred.priority_score, truth.priority, cfg.delta_mode)
                low.append(max(-math.log(delta / 2.0 + 1.0), -1.0) + 0.0)  # + 0.0 turns -0.0 into 0.0
            else:
                low.append(phi + phi_hat)
    return high, low


def aaw(preds: Sequence[Prediction], truths: Sequence, vocab: LabelVocabulary,
        cfg: AawConfig | None = None) -> tuple[float, float]:
    """Returns (aaw_all, aaw_high). An empty priority group contributes 0 to its half."""
    high, low = alert_worth(preds, truths, vocab, cfg or AawConfig())
    mean_high = sum(high) / len(high) if high else 0.0
    mean_low = sum(low) / len(low) if low else 0.0
    return 0.5 * (mean_high + mean_low), mean_high


@dataclass
class MetricsReport:
    f1_weighted: float
    per_label: dict[str, LabelScore]
    hamming_loss: float
    jaccard_mean: float
    aaw_high: float | None
    aaw_all: float | None
    n_tweets: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["per_label"] = {name: asdict(s) for name, s in self.per_label.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> MetricsReport:
        try:
            per = {name: LabelScore(**s) for name, s in d["per_label"].items()}
            return cls(d["f1_weighted"], per, d["hamming_loss"], d["jaccard_mean"], d["aaw_high"],
                       d["aaw_all"], d.get("n_tweets", 0), d.get("extra", {}))
        except (KeyError, TypeError) as exc:
            raise FormatError(f"malformed metrics report: {exc}") from None

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> MetricsReport:
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: not a metrics report ({exc})") from None


def report(preds: Sequence[Prediction], truths: Sequence, vocab: LabelVocabulary,
           cfg: AawConfig | None = None) -> MetricsReport:
    """Every metric for a set of predictions. AAW fields stay None when any truth lacks a priority."""
    pred_bits = [p.labels for p in preds]
    truth_bits = [tuple(_truth_bits(t, vocab)) for t in truths]
    f1w, per = weighted_f1(pred_bits, truth_bits, vocab)
    aaw_all = aaw_high = None
    if all(t.priority is not None for t in truths):
        aaw_all, aaw_high = aaw(preds, truths, vocab, cfg)
    return MetricsReport(f1w, per, hamming_loss(pred_bits, truth_bits, vocab.k),
                         jaccard_mean(pred_bits, truth_bits), aaw_high, aaw_all, len(truths))


def evaluate(checkpoint, tweets: Sequence, graph, cfg: AawConfig | None = None) -> MetricsReport:
    """Run a trained checkpoint in eval mode over ``tweets`` and score it."""
    if not tweets:
        raise DataError("cannot evaluate on an empty split")
    cfg = cfg or AawConfig()
    preds = checkpoint.predict(tweets, graph, actionable=cfg.actionable_labels)
    return report(preds, tweets, checkpoint.vocab, cfg)
