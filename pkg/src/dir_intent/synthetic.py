"""Synthetic intent corpora built from Gaussian token clusters.

Each intent owns a prototype vector; its content words are noisy copies of the
prototype and its label name is a single word sitting exactly on it. Filler
words shared by all intents are drawn independently. ``overlap`` mixes words of
a neighbouring intent into utterances to create ambiguous items.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

NAMES = ("alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel", "india", "juliet")


@dataclass
class SyntheticSpec:
    n_seen: int = 3
    n_unseen: int = 2
    per_intent: int = 60
    dim: int = 16
    content_words: int = 12
    filler_words: int = 10
    token_noise: float = 0.35
    content_share: float = 0.6
    overlap: float = 0.0
    min_len: int = 4
    max_len: int = 8
    seed: int = 0


def generate(spec: SyntheticSpec) -> tuple[list[dict], dict, dict[str, np.ndarray]]:
    """Return (records, label metadata, embeddings)."""
    rng = np.random.default_rng(spec.seed)
    n = spec.n_seen + spec.n_unseen
    if n > len(NAMES):
        raise ValueError(f"at most {len(NAMES)} intents")
    labels = [name.capitalize() + "Intent" for name in NAMES[:n]]
    protos = rng.normal(size=(n, spec.dim))
    protos *= 2.0 / np.linalg.norm(protos, axis=1, keepdims=True)
    emb: dict[str, np.ndarray] = {"intent": np.zeros(spec.dim)}
    content = []
    for k in range(n):
        emb[NAMES[k]] = protos[k]
        words = [f"{NAMES[k]}{i}" for i in range(spec.content_words)]
        for w in words:
            emb[w] = protos[k] + spec.token_noise * rng.normal(size=spec.dim)
        content.append(words)
    fillers = [f"filler{i}" for i in range(spec.filler_words)]
    for w in fillers:
        emb[w] = 0.5 * rng.normal(size=spec.dim)
    records = []
    for k in range(n):
        for _ in range(spec.per_intent):
            length = int(rng.integers(spec.min_len, spec.max_len + 1))
            other = (k + 1) % n if rng.random() < spec.overlap else k
            words = []
            for _ in range(length):
                if rng.random() < spec.content_share:
                    pool = content[other] if rng.random() < 0.5 else content[k]
                    words.append(pool[int(rng.integers(len(pool)))])
                else:
                    words.append(fillers[int(rng.integers(len(fillers)))])
            records.append({"text": " ".join(words), "label": labels[k]})
    meta = {"seen": labels[: spec.n_seen], "unseen": labels[spec.n_seen:]}
    return records, meta, emb


def write(spec: SyntheticSpec, directory) -> dict[str, Path]:
    """Write data.jsonl, labels.json and embeddings.txt into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    records, meta, emb = generate(spec)
    paths = {"dataset": directory / "data.jsonl", "labels": directory / "labels.json",
             "embeddings": directory / "embeddings.txt"}
    paths["dataset"].write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    paths["labels"].write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    lines = [f"{tok} " + " ".join(repr(float(x)) for x in vec) for tok, vec in emb.items()]
    paths["embeddings"].write_text("\n".join(lines) + "\n", encoding="utf-8")
    return paths
