"""Corpus ingestion, label vocabulary and deterministic splits."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, FormatError

LabelVector = tuple[int, ...]


@dataclass(frozen=True)
class LabelVocabulary:
    labels: tuple[str, ...]

    def __post_init__(self):
        labels = tuple(self.labels)
        object.__setattr__(self, "labels", labels)
        if any(not isinstance(name, str) or not name for name in labels):
            raise DataError("label names must be non-empty strings")
        if len(set(labels)) != len(labels):
            raise DataError(f"duplicate label names in vocabulary: {labels}")
        object.__setattr__(self, "_index", {name: i for i, name in enumerate(labels)})

    @classmethod
    def from_labels(cls, names: Iterable[str]) -> LabelVocabulary:
        return cls(tuple(sorted(set(names))))

    @property
    def k(self) -> int:
        return len(self.labels)

    def __len__(self) -> int:
        return len(self.labels)

    def __contains__(self, name: object) -> bool:
        return name in self._index

    def __iter__(self):
        return iter(self.labels)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise DataError(f"unknown label {name}") from None

    def decode(self, bits: Sequence[int]) -> set[str]:
        if len(bits) != self.k:
            raise DataError(f"label vector has length {len(bits)}, vocabulary has {self.k}")
        return {name for name, bit in zip(self.labels, bits) if bit}


@dataclass
class RawTweet:
    id: str
    text: str
    labels: list[str] = field(default_factory=list)
    priority: float | None = None

    def __post_init__(self):
        if self.priority is not None and not 0.0 <= self.priority <= 1.0:
            raise DataError(f"tweet {self.id}: priority {self.priority} outside [0, 1]")

    def to_record(self) -> dict:
        record = {"id": self.id, "text": self.text, "labels": list(self.labels)}
        if self.priority is not None:
            record["priority"] = self.priority
        return record


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[str, ...]
    valid: tuple[str, ...]
    test: tuple[str, ...]
    seed: int

    def to_dict(self) -> dict:
        return {"seed": self.seed, "train": list(self.train), "valid": list(self.valid),
                "test": list(self.test)}

    @classmethod
    def from_dict(cls, d: dict) -> DatasetSplit:
        try:
            return cls(tuple(d["train"]), tuple(d["valid"]), tuple(d["test"]), int(d["seed"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed split object: {exc}") from exc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> DatasetSplit:
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: not a split file ({exc})") from exc


def _parse_record(line: str, lineno: int) -> RawTweet:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DataError(f"line {lineno}: malformed record ({exc.msg})") from None
    if not isinstance(rec, dict):
        raise DataError(f"line {lineno}: record is not an object")
    tid, text, labels = rec.get("id"), rec.get("text"), rec.get("labels", [])
    if not isinstance(tid, str) or not isinstance(text, str):
        raise DataError(f"line {lineno}: fields 'id' and 'text' must be strings")
    if not isinstance(labels, list) or not all(isinstance(x, str) for x in labels):
        raise DataError(f"line {lineno}: 'labels' must be an array of strings")
    priority = rec.get("priority")
    if priority is not None:
        if isinstance(priority, bool) or not isinstance(priority, (int, float)):
            raise DataError(f"line {lineno}: 'priority' must be a number")
        priority = float(priority)
        if not 0.0 <= priority <= 1.0:
            raise DataError(f"line {lineno}: priority {priority} outside [0, 1]")
    return RawTweet(tid, text, labels, priority)


def load_corpus(path, vocab: LabelVocabulary | None = None) -> tuple[list[RawTweet], LabelVocabulary]:
    """Read a line-delimited corpus file.

    Without a supplied vocabulary the label set is the sorted union of the
    labels seen in the file.
    """
    corpus: list[RawTweet] = []
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            tweet = _parse_record(line, lineno)
            if tweet.id in seen_ids:
                raise DataError(f"line {lineno}: duplicate tweet id {tweet.id}")
            seen_ids.add(tweet.id)
            if vocab is not None:
                for name in tweet.labels:
                    if name not in vocab:
                        raise DataError(f"unknown label {name}")
            corpus.append(tweet)
    if vocab is None:
        vocab = LabelVocabulary.from_labels(name for t in corpus for name in t.labels)
    return corpus, vocab


def save_corpus(corpus: Iterable[RawTweet], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for tweet in corpus:
            fh.write(json.dumps(tweet.to_record(), ensure_ascii=False) + "\n")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def make_split(corpus: Sequence[RawTweet], ratios: tuple[float, float] = (0.8, 0.2),
               valid_fraction_of_train: float = 0.2, seed: int = 0) -> DatasetSplit:
    """Shuffle ids under ``seed``; carve test first, then validation from the rest."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise DataError(f"split ratios {ratios} do not sum to 1")
    if not 0.0 < valid_fraction_of_train < 1.0:
        raise DataError("valid_fraction_of_train must lie in (0, 1)")
    n = len(corpus)
    if n < 3:
        raise DataError(f"corpus of {n} tweets cannot populate train/valid/test")
    ids = [t.id for t in corpus]
    if len(set(ids)) != n:
        raise DataError("duplicate tweet ids in corpus")

    n_test = min(max(1, _round_half_up(ratios[1] * n)), n - 2)
    n_valid = min(max(1, _round_half_up(valid_fraction_of_train * (n - n_test))), n - n_test - 1)
    order = np.random.default_rng(seed).permutation(n)
    shuffled = [ids[i] for i in order]
    return DatasetSplit(
        train=tuple(shuffled[n_test + n_valid:]),
        valid=tuple(shuffled[n_test:n_test + n_valid]),
        test=tuple(shuffled[:n_test]),
        seed=seed,
    )


def encode_labels(tweet: RawTweet, vocab: LabelVocabulary) -> LabelVector:
    bits = [0] * vocab.k
    for name in tweet.labels:
        bits[vocab.index(name)] = 1
    return tuple(bits)


def select(corpus: Sequence, ids: Iterable[str]) -> list:
    """Pick tweets by id, in the order of ``ids``."""
    by_id = {t.id: t for t in corpus}
    try:
        return [by_id[i] for i in ids]
    except KeyError as exc:
        raise DataError(f"tweet id {exc.args[0]} not in corpus") from None
