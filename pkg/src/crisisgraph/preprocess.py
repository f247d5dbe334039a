"""Tweet cleaning, tokenization and gazetteer entity spotting."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .dataset import LabelVector, LabelVocabulary, RawTweet, encode_labels
from .errors import DataError, FormatError

PROCESSED_FORMAT = "crisisgraph-processed/1"

_URL = re.compile(r"(?:https?://|www\.)\S*", re.IGNORECASE)
_MENTION = re.compile(r"@\w+")
_REPEATED_PUNCT = re.compile(r"([.?!])\1+")
_NON_ASCII = re.compile(r"[^\x00-\x7f]+")
_TOKEN = re.compile(r"[a-z0-9_]+(?:'[a-z0-9_]+)*")


@dataclass(frozen=True)
class ProcessedTweet:
    id: str
    tokens: tuple[str, ...]
    entities: tuple[str, ...]
    label_vector: LabelVector
    priority: float | None = None


@dataclass(frozen=True)
class Gazetteer:
    """Multi-word surface forms, stored as normalized token tuples."""

    entries: frozenset[tuple[str, ...]]
    max_len: int = field(init=False)

    def __post_init__(self):
        if any(not e for e in self.entries):
            raise DataError("gazetteer entries must be non-empty")
        object.__setattr__(self, "max_len", max((len(e) for e in self.entries), default=0))

    @classmethod
    def from_strings(cls, forms: Iterable[str], stoplist: set[str] | frozenset[str] = frozenset()) -> Gazetteer:
        # Entries are normalized with the tweet cleaner so they can match cleaned token streams.
        entries = set()
        for form in forms:
            if not form.strip():
                continue
            toks = tuple(clean_and_tokenize(form, stoplist, {}))
            if not toks:
                raise DataError(f"gazetteer entry {form!r} consists only of stop-words")
            entries.add(toks)
        return cls(frozenset(entries))

    def __contains__(self, surface: str) -> bool:
        return tuple(surface.lower().split()) in self.entries


def default_stoplist() -> frozenset[str]:
    text = resources.files("crisisgraph").joinpath("data/stopwords.txt").read_text(encoding="utf-8")
    return frozenset(w.strip().lower() for w in text.splitlines() if w.strip())


def default_emoji_map() -> dict[str, str]:
    text = resources.files("crisisgraph").joinpath("data/emoji.tsv").read_text(encoding="utf-8")
    return _parse_emoji_lines(text.splitlines(), "<bundled emoji map>")


def load_stoplist(path) -> frozenset[str]:
    with open(path, encoding="utf-8") as fh:
        return frozenset(w.strip().lower() for w in fh if w.strip())


def load_gazetteer(path, stoplist: set[str] | frozenset[str] = frozenset()) -> Gazetteer:
    with open(path, encoding="utf-8") as fh:
        return Gazetteer.from_strings(fh.read().splitlines(), stoplist)


def _parse_emoji_lines(lines: Iterable[str], source: str) -> dict[str, str]:
    mapping = {}
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 2 or not parts[0] or not parts[1].strip():
            raise DataError(f"{source} line {lineno}: expected 'emoji<TAB>name'")
        mapping[parts[0]] = parts[1].strip()
    return mapping


def load_emoji_map(path) -> dict[str, str]:
    with open(path, encoding="utf-8") as fh:
        return _parse_emoji_lines(fh, str(path))


def clean_and_tokenize(text: str, stoplist: set[str] | frozenset[str],
                       emoji_map: Mapping[str, str]) -> list[str]:
    # Longest emoji keys first so sequences with variation selectors win over their bare base.
    for emo in sorted(emoji_map, key=len, reverse=True):
        if emo in text:
            text = text.replace(emo, f" {emoji_map[emo]} ")
    text = _URL.sub(" ", text)
    text = _MENTION.sub(" ", text)
    text = text.replace("#", " ")
    text = _NON_ASCII.sub(" ", text)
    text = _REPEATED_PUNCT.sub(r"\1", text)
    text = " ".join(text.split()).lower()
    return [tok for tok in _TOKEN.findall(text) if tok not in stoplist]


def entity_spans(tokens: Sequence[str], gaz: Gazetteer) -> list[tuple[int, int]]:
    """Half-open token spans of longest, left-to-right, non-overlapping matches."""
    spans = []
    i, n = 0, len(tokens)
    while i < n:
        for length in range(min(gaz.max_len, n - i), 0, -1):
            if tuple(tokens[i:i + length]) in gaz.entries:
                spans.append((i, i + length))
                i += length
                break
        else:
            i += 1
    return spans


def spot_entities(tokens: Sequence[str], gaz: Gazetteer) -> list[str]:
    return [" ".join(tokens[a:b]) for a, b in entity_spans(tokens, gaz)]


def preprocess_corpus(corpus: Sequence[RawTweet], vocab: LabelVocabulary,
                      stoplist: set[str] | frozenset[str] | None = None,
                      emoji_map: Mapping[str, str] | None = None,
                      gaz: Gazetteer | None = None) -> list[ProcessedTweet]:
    stoplist = default_stoplist() if stoplist is None else stoplist
    emoji_map = default_emoji_map() if emoji_map is None else emoji_map
    gaz = gaz or Gazetteer(frozenset())
    out = []
    for tweet in corpus:
        tokens = tuple(clean_and_tokenize(tweet.text, stoplist, emoji_map))
        out.append(ProcessedTweet(
            id=tweet.id,
            tokens=tokens,
            entities=tuple(spot_entities(tokens, gaz)),
            label_vector=encode_labels(tweet, vocab),
            priority=tweet.priority,
        ))
    return out


def save_processed(tweets: Iterable[ProcessedTweet], vocab: LabelVocabulary, path) -> None:
    """First line is a header carrying the label vocabulary; then one tweet per line."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"format": PROCESSED_FORMAT, "labels": list(vocab.labels)}) + "\n")
        for t in tweets:
            rec = {"id": t.id, "tokens": list(t.tokens), "entities": list(t.entities),
                   "labels": sorted(vocab.decode(t.label_vector))}
            if t.priority is not None:
                rec["priority"] = t.priority
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def load_processed(path) -> tuple[list[ProcessedTweet], LabelVocabulary]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise FormatError(f"{path}: empty processed-corpus file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError:
        header = None
    if not isinstance(header, dict) or header.get("format") != PROCESSED_FORMAT:
        raise FormatError(f"{path}: missing '{PROCESSED_FORMAT}' header line")
    vocab = LabelVocabulary(tuple(header["labels"]))
    tweets = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            raw = RawTweet(rec["id"], "", rec.get("labels", []), rec.get("priority"))
            tweets.append(ProcessedTweet(raw.id, tuple(rec["tokens"]), tuple(rec["entities"]),
                                         encode_labels(raw, vocab), raw.priority))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DataError(f"line {lineno}: malformed processed record ({exc})") from None
    return tweets, vocab
