"""Zero-shot / generalised zero-shot prediction and the two-stage LOF pipeline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as tn
from .classifiers import CapsuleParams, compatibility_scores, dynamic_routing
from .errors import ShapeError

DIRECT = "direct"
TWO_STAGE_SEEN = "two-stage-seen"
TWO_STAGE_UNSEEN = "two-stage-unseen"


@dataclass
class Prediction:
    label_index: int
    scores: np.ndarray
    route: str = DIRECT


def _offset(L: np.ndarray, K: int) -> int:
    """Index of the first candidate: 0 for K x K, I for K x J."""
    return K - L.shape[1]


def _check_L(L: np.ndarray, K: int) -> np.ndarray:
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.shape[0] != K or L.shape[1] > K:
        raise ShapeError(f"similarity matrix of shape {L.shape} does not fit K={K}")
    return L


def transform_probs(logits: np.ndarray, L: np.ndarray) -> np.ndarray:
    """softmax(logits @ L) row-wise for (N, K) logits."""
    return tn.softmax(np.asarray(logits) @ L, axis=-1).data


def zsid_predict_linear(H, W, L) -> Prediction:
    """Softmax of mean-pooled hidden states through W and the similarity matrix."""
    H, W = np.asarray(H, dtype=float), np.asarray(W, dtype=float)
    L = _check_L(L, W.shape[1])
    probs = transform_probs(H.mean(axis=0)[None, :] @ W, L)[0]
    return Prediction(_offset(L, W.shape[1]) + int(np.argmax(probs)), probs)


def zsid_predict_capsule(heads, params: CapsuleParams, L) -> Prediction:
    L = _check_L(L, params.K)
    norms = dynamic_routing(heads, params, similarity=L).norms.data
    return Prediction(_offset(L, params.K) + int(np.argmax(norms)), norms)


def compat_predict(u_rep, label_reps, candidates) -> Prediction:
    """Most similar label among ``candidates`` (ties go to the lowest index)."""
    candidates = sorted(int(c) for c in candidates)
    if not candidates:
        raise ValueError("compat_predict needs at least one candidate intent")
    scores = compatibility_scores(u_rep, np.asarray(label_reps)[candidates]).data
    return Prediction(candidates[int(np.argmax(scores))], scores)


# --------------------------------------------------------------------------
# local outlier factor

@dataclass
class LofConfig:
    k: int = 20
    threshold: float = 1.5

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("LOF needs k >= 1")
        if self.threshold <= 0:
            raise ValueError("LOF threshold must be positive")


_LRD_EPS = 1e-10


def _row_mean(a: np.ndarray) -> np.ndarray:
    # left-to-right accumulation keeps scores bit-identical to a plain loop
    acc = np.zeros(a.shape[0])
    for j in range(a.shape[1]):
        acc = acc + a[:, j]
    return acc / a.shape[1]


def _pair_distances(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    acc = np.zeros((X.shape[0], Y.shape[0]))
    for j in range(X.shape[1]):
        diff = X[:, j, None] - Y[None, :, j]
        acc = acc + diff * diff
    return np.sqrt(acc)


def _neighbours(X: np.ndarray, Y: np.ndarray, k: int, exclude_self: bool, chunk: int = 256):
    """k nearest rows of Y for each row of X, ordered by (distance, index)."""
    n = X.shape[0]
    idx = np.empty((n, k), dtype=np.int64)
    dist = np.empty((n, k))
    for start in range(0, n, chunk):
        d = _pair_distances(X[start:start + chunk], Y)
        if exclude_self:
            rows = np.arange(d.shape[0])
            d[rows, start + rows] = np.inf
        order = np.argsort(d, axis=1, kind="stable")[:, :k]
        idx[start:start + chunk] = order
        dist[start:start + chunk] = np.take_along_axis(d, order, axis=1)
    return idx, dist


class LofModel:
    """Reference set with precomputed k-distances and local reachability densities."""

    def __init__(self, points, k: int):
        points = np.asarray(points, dtype=float)
        if k >= len(points):
            raise ValueError(f"LOF needs k < number of reference points ({k} >= {len(points)})")
        self.points = points
        self.k = k
        self.nn_idx, self.nn_dist = _neighbours(points, points, k, exclude_self=True)
        self.k_distance = self.nn_dist[:, -1]
        self.lrd = self._lrd(self.nn_idx, self.nn_dist)

    def _lrd(self, idx, dist) -> np.ndarray:
        reach = np.maximum(dist, self.k_distance[idx])
        return 1.0 / (_row_mean(reach) + _LRD_EPS)

    def fit_scores(self) -> np.ndarray:
        """LOF of each reference point with itself left out of its neighbourhood."""
        return _row_mean(self.lrd[self.nn_idx]) / self.lrd

    def score(self, queries) -> np.ndarray:
        queries = np.atleast_2d(np.asarray(queries, dtype=float))
        idx, dist = _neighbours(queries, self.points, self.k, exclude_self=False)
        lrd_q = self._lrd(idx, dist)
        return _row_mean(self.lrd[idx]) / lrd_q


def lof_scores(points, queries, cfg: LofConfig) -> np.ndarray:
    return LofModel(points, cfg.k).score(queries)


@dataclass
class LofGate:
    model: LofModel
    threshold: float

    @classmethod
    def fit(cls, features, k: int = 20, quantile: float = 0.95) -> "LofGate":
        model = LofModel(features, k)
        return cls(model, float(np.quantile(model.fit_scores(), quantile)))

    def is_unseen(self, features) -> np.ndarray:
        return self.model.score(features) > self.threshold


def two_stage_predict(seen_scores, lof_score: float, threshold: float, unseen_scores, I: int) -> Prediction:
    """Route by LOF score: above threshold goes to the zero-shot stage over unseen intents."""
    if lof_score > threshold:
        unseen_scores = np.asarray(unseen_scores)
        return Prediction(I + int(np.argmax(unseen_scores)), unseen_scores, TWO_STAGE_UNSEEN)
    seen_scores = np.asarray(seen_scores)
    return Prediction(int(np.argmax(seen_scores)), seen_scores, TWO_STAGE_SEEN)


def two_stage_batch(seen_scores: np.ndarray, lof: np.ndarray, threshold: float,
                    unseen_scores: np.ndarray, I: int) -> tuple[np.ndarray, list[str]]:
    unseen = lof > threshold
    pred = np.where(unseen, I + np.argmax(unseen_scores, axis=1), np.argmax(seen_scores, axis=1))
    routes = [TWO_STAGE_UNSEEN if u else TWO_STAGE_SEEN for u in unseen]
    return pred, routes
