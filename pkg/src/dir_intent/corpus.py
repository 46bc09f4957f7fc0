"""Dataset ingestion, tokenisation, embeddings and split construction.

Dataset files are JSON lines of ``{"text": ..., "label": ...}``. The label
metadata file is a JSON object with ``seen`` and ``unseen`` name lists and an
optional ``keyword_overrides`` mapping used in place of the raw label name.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

logger = logging.getLogger(__name__)

REAL = "real"
LABEL_PSEUDO = "label-pseudo"

_CAMEL = re.compile(r"(?<=[a-z0-9])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])")
_WORD = re.compile(r"[^\W_]+", re.UNICODE)


@dataclass(frozen=True)
class Utterance:
    id: str
    tokens: tuple
    label: str
    origin: str = REAL


@dataclass(frozen=True)
class LabelSet:
    seen: tuple
    unseen: tuple
    keywords: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        overlap = set(self.seen) & set(self.unseen)
        if overlap:
            raise DataError(f"labels both seen and unseen: {sorted(overlap)}")
        if len(set(self.seen)) != len(self.seen) or len(set(self.unseen)) != len(self.unseen):
            raise DataError("duplicate label names in label metadata")

    @property
    def I(self) -> int:  # noqa: E743
        return len(self.seen)

    @property
    def J(self) -> int:
        return len(self.unseen)

    @property
    def K(self) -> int:
        return len(self.seen) + len(self.unseen)

    @property
    def names(self) -> tuple:
        return tuple(self.seen) + tuple(self.unseen)

    def index(self, label: str) -> int:
        try:
            return self.names.index(label)
        except ValueError:
            raise DataError(f"unknown label {label!r}") from None

    def is_seen(self, label: str) -> bool:
        return label in self.seen

    def name_tokens(self, label: str) -> list[str]:
        """Tokens used when the label name stands in for an utterance."""
        return tokenize(self.keywords.get(label, label))


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace/punctuation and on camel-case boundaries.

    >>> tokenize("AddToPlaylist")
    ['add', 'to', 'playlist']
    """
    tokens = []
    for word in _WORD.findall(text):
        tokens.extend(part.lower() for part in _CAMEL.split(word) if part)
    if not tokens:
        raise DataError(f"no tokens in text {text!r}")
    return tokens


def load_labels(path) -> LabelSet:
    path = Path(path)
    if not path.exists():
        raise DataError(f"label metadata file not found: {path}")
    meta = json.loads(path.read_text(encoding="utf-8"))
    try:
        seen, unseen = meta["seen"], meta["unseen"]
    except KeyError as exc:
        raise DataError(f"{path}: missing field {exc.args[0]!r}") from None
    return LabelSet(tuple(seen), tuple(unseen), dict(meta.get("keyword_overrides") or {}))


def load_corpus(path, labels) -> tuple[list[Utterance], LabelSet]:
    """Read a JSON-lines dataset and validate labels against the metadata."""
    path = Path(path)
    if not isinstance(labels, LabelSet):
        labels = load_labels(labels)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    known = set(labels.names)
    utterances = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            uid = f"{path.stem}:{lineno}"
            try:
                record = json.loads(line)
                text, label = record["text"], record["label"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DataError(f"{path}:{lineno}: malformed record ({exc})") from None
            if label not in known:
                raise DataError(f"utterance {uid} has unknown label {label!r}")
            utterances.append(Utterance(uid, tuple(tokenize(text)), label))
    if not utterances:
        raise DataError(f"empty corpus: {path}")
    return utterances, labels


class EmbeddingTable:
    """Token to vector map with a deterministic out-of-vocabulary fallback."""

    def __init__(self, dim: int, entries: dict | None = None, oov: str = "zeros", seed: int = 0):
        if oov not in ("zeros", "hashed-uniform"):
            raise ValueError(f"unknown oov policy {oov!r}")
        self.dim = int(dim)
        self.entries = dict(entries or {})
        self.oov = oov
        self.seed = seed

    def __contains__(self, token) -> bool:
        return token in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def lookup(self, token: str) -> np.ndarray:
        vec = self.entries.get(token)
        if vec is not None:
            return vec
        if self.oov == "zeros":
            return np.zeros(self.dim)
        digest = hashlib.sha256(f"{self.seed}\x00{token}".encode()).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        return rng.uniform(-0.25, 0.25, self.dim)

    def matrix(self, vocab: Sequence[str]) -> np.ndarray:
        if not vocab:
            return np.zeros((0, self.dim))
        return np.stack([self.lookup(t) for t in vocab])


def load_embeddings(path, oov: str = "zeros", seed: int = 0) -> EmbeddingTable:
    """Read word2vec text format; an optional ``count dim`` header line is skipped."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"embedding file not found: {path}")
    entries: dict[str, np.ndarray] = {}
    dim = None
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip().split(" ")
            if not parts or not parts[0]:
                continue
            if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                continue
            token, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                raise DataError(f"{path}:{lineno}: vector length {len(values)}, expected {dim}")
            if token in entries:
                continue
            try:
                entries[token] = np.array([float(v) for v in values])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric vector entry") from None
    if dim is None:
        raise DataError(f"no vectors in {path}")
    return EmbeddingTable(dim, entries, oov=oov, seed=seed)


@dataclass(frozen=True)
class SplitSpec:
    mode: str = "gzsid"
    train_ratio: float = 0.7
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("zsid", "gzsid"):
            raise ValueError(f"unknown split mode {self.mode!r}")
        if not 0 < self.train_ratio < 1:
            raise ValueError("train_ratio must lie strictly between 0 and 1")


def _train_count(n: int, ratio: float) -> int:
    # round first so 0.7 * 70 does not floor to 48
    return math.floor(round(ratio * n, 9))


def _by_label(corpus: Iterable[Utterance]) -> dict[str, list[Utterance]]:
    groups: dict[str, list[Utterance]] = {}
    for utt in corpus:
        groups.setdefault(utt.label, []).append(utt)
    return groups


def make_split(corpus: Sequence[Utterance], labels: LabelSet, spec: SplitSpec):
    """Return ``(train, test)`` lists.

    zsid: all seen utterances train, all unseen utterances test.
    gzsid: per seen intent floor(ratio*n) train and the rest test; for each
    unseen intent the same held-out fraction is sampled into test.
    """
    groups = _by_label(corpus)
    if spec.mode == "zsid":
        train = [u for u in corpus if labels.is_seen(u.label)]
        test = [u for u in corpus if not labels.is_seen(u.label)]
        return train, test
    rng = np.random.default_rng(spec.seed)
    train, test = [], []
    for name in labels.seen:
        items = groups.get(name, [])
        if len(items) < 2:
            raise DataError(f"seen intent {name!r} has {len(items)} utterances; gzsid needs at least 2")
        order = rng.permutation(len(items))
        n_train = _train_count(len(items), spec.train_ratio)
        train.extend(items[i] for i in sorted(order[:n_train]))
        test.extend(items[i] for i in sorted(order[n_train:]))
    for name in labels.unseen:
        items = groups.get(name, [])
        if not items:
            continue
        order = rng.permutation(len(items))
        n_test = len(items) - _train_count(len(items), spec.train_ratio)
        test.extend(items[i] for i in sorted(order[:n_test]))
    return train, test


def augment_label_pseudo_utterances(train: Sequence[Utterance], labels: LabelSet) -> list[Utterance]:
    """Append replicated unseen label names so each unseen intent matches the mean seen count."""
    out = list(train)
    if not labels.unseen:
        return out
    counts = _by_label(u for u in train if labels.is_seen(u.label))
    if not counts:
        raise DataError("cannot replicate label names without seen training utterances")
    target = round(sum(len(v) for v in counts.values()) / len(counts))
    present = _by_label(train)
    for name in labels.unseen:
        tokens = tuple(labels.name_tokens(name))
        have = len(present.get(name, []))
        out.extend(Utterance(f"pseudo:{name}:{i}", tokens, name, LABEL_PSEUDO)
                   for i in range(have, target))
    return out


def build_vocab(utterances: Iterable[Utterance], labels: LabelSet) -> list[str]:
    """Sorted vocabulary over utterance and label-name tokens (index 0 is padding)."""
    vocab = set()
    for u in utterances:
        vocab.update(u.tokens)
    for name in labels.names:
        vocab.update(labels.name_tokens(name))
    return ["<pad>"] + sorted(vocab)
