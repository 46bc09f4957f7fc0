"""Intent representations and the inter-intent similarity matrices.

Distances are squared Mahalanobis distances with an isotropic covariance
sigma^2 I. They become similarity weights through a kernel, by default
exp(-d / tau) followed by row normalisation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import EmbeddingTable, LabelSet
from .errors import ConfigError, DataError


@dataclass
class SimilarityConfig:
    sigma: float = 1.0
    kernel: str = "exp-neg"
    tau: float | None = None   # None: mean off-diagonal distance
    row_normalize: bool = True

    def __post_init__(self):
        if self.sigma <= 0:
            raise ConfigError("sigma must be positive")
        if self.tau is not None and self.tau <= 0:
            raise ConfigError("tau must be positive")
        if self.kernel not in ("exp-neg", "neg-distance"):
            raise ConfigError(f"unknown kernel {self.kernel!r}")
        if self.kernel == "neg-distance" and self.row_normalize:
            raise ConfigError("row normalisation needs a positive kernel (use exp-neg)")


@dataclass
class IntentRepresentations:
    g: np.ndarray          # (K, D) in label-set order
    counts: np.ndarray     # items averaged per intent
    I: int

    @property
    def K(self) -> int:
        return self.g.shape[0]


def average_by_intent(vectors: np.ndarray, label_idx, K: int, I: int) -> IntentRepresentations:
    vectors = np.asarray(vectors, dtype=float)
    label_idx = np.asarray(label_idx, dtype=np.int64)
    counts = np.bincount(label_idx, minlength=K)
    if (counts == 0).any():
        missing = np.flatnonzero(counts == 0).tolist()
        raise DataError(f"intents {missing} have no training items to average")
    sums = np.zeros((K, vectors.shape[1]))
    np.add.at(sums, label_idx, vectors)
    return IntentRepresentations(sums / counts[:, None], counts, I)


def compute_intent_representations(model, train, labels: LabelSet) -> IntentRepresentations:
    """Average each intent's utterance representations under ``model``.

    Unseen intents are averaged over their label-name pseudo-utterances.
    """
    vectors = model.represent(train)
    return average_by_intent(vectors, [labels.index(u.label) for u in train], labels.K, labels.I)


def intent_distance(g1, g2, sigma: float = 1.0) -> float:
    diff = np.asarray(g1, dtype=float) - np.asarray(g2, dtype=float)
    return float(diff @ diff) / sigma ** 2


def distance_matrix(g: np.ndarray, sigma: float = 1.0) -> np.ndarray:
    diff = g[:, None, :] - g[None, :, :]
    return np.sum(diff * diff, axis=-1) / sigma ** 2


def _kernel(d: np.ndarray, cfg: SimilarityConfig) -> np.ndarray:
    if cfg.kernel == "neg-distance":
        return -d
    tau = cfg.tau
    if tau is None:
        K = d.shape[0]
        off = d[~np.eye(K, dtype=bool)]
        tau = float(off.mean()) if off.size and off.mean() > 0 else 1.0
    return np.exp(-d / tau)


def similarity_from_vectors(g: np.ndarray, I: int, mode: str, cfg: SimilarityConfig) -> np.ndarray:
    if mode not in ("zsl", "gzsl"):
        raise ValueError(f"unknown similarity mode {mode!r}")
    L = _kernel(distance_matrix(g, cfg.sigma), cfg)
    if mode == "zsl":
        L = L[:, I:]
    if cfg.row_normalize:
        L = L / L.sum(axis=1, keepdims=True)
    return L


def build_similarity_matrix(reps: IntentRepresentations, mode: str, cfg: SimilarityConfig) -> np.ndarray:
    """L_zsl (K x J) or L_gzsl (K x K) from learned intent representations."""
    return similarity_from_vectors(reps.g, reps.I, mode, cfg)


def label_embedding_vectors(labels: LabelSet, table: EmbeddingTable) -> np.ndarray:
    return np.stack([table.matrix(labels.name_tokens(n)).mean(axis=0) for n in labels.names])


def embedding_similarity_baseline(labels: LabelSet, table: EmbeddingTable, cfg: SimilarityConfig,
                                  mode: str = "gzsl") -> np.ndarray:
    """Same pipeline as :func:`build_similarity_matrix` on mean label-word embeddings."""
    return similarity_from_vectors(label_embedding_vectors(labels, table), labels.I, mode, cfg)


def identity_similarity(K: int, I: int, mode: str) -> np.ndarray:
    eye = np.eye(K)
    return eye[:, I:] if mode == "zsl" else eye
