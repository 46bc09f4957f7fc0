"""Intent classifiers over the full K = I + J prediction space."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as tn
from .errors import ShapeError
from .tensor import Tensor


def linear_logits(pooled: Tensor, W: Tensor) -> Tensor:
    """(B, D_H) @ (D_H, K) pre-softmax scores."""
    return pooled @ W


def linear_classify(H, W, K: int | None = None) -> Tensor:
    """Softmax of time-averaged hidden states times ``W``.

    ``H`` is (T, D_H) for one utterance or (B, T, D_H) for a batch.
    """
    H, W = tn.constant(H), tn.constant(W)
    if K is not None and W.shape[1] != K:
        raise ShapeError(f"classifier has {W.shape[1]} outputs but the label set has K={K}")
    if H.ndim == 2:
        return tn.softmax(tn.mean(H, axis=0).reshape(1, H.shape[1]) @ W, axis=-1)[0]
    return tn.softmax(tn.mean(H, axis=1) @ W, axis=-1)


def squash(s, axis: int = -1) -> Tensor:
    """v = (|s|^2 / (1 + |s|^2)) * s / |s|, computed as s * |s| / (1 + |s|^2)."""
    s = tn.constant(s)
    n = tn.l2norm(s, axis=axis)
    factor = tn.div(n, tn.add(tn.square(n), 1.0))
    return tn.mul(s, tn.expand(factor, s.shape[axis], axis=axis))


@dataclass
class CapsuleParams:
    W: Tensor  # (K, R, D_H, D_C)
    iterations: int = 3

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("routing needs at least one iteration")

    @property
    def K(self) -> int:
        return self.W.shape[0]

    @property
    def R(self) -> int:
        return self.W.shape[1]

    @property
    def D_C(self) -> int:
        return self.W.shape[3]


@dataclass
class RoutingResult:
    v: Tensor        # (B, K_out, D_C) activations
    norms: Tensor    # (B, K_out)
    c: Tensor        # (B, K, R) coupling coefficients of the last iteration
    u_hat: Tensor    # (B, K, R, D_C)


def predictions(heads: Tensor, params: CapsuleParams) -> Tensor:
    """u_hat[b, k, r] = m[b, r] @ W[k, r]  -> (B, K, R, D_C)."""
    B, R, D = heads.shape
    K, D_C = params.K, params.D_C
    if R != params.R or D != params.W.shape[2]:
        raise ShapeError(f"heads {heads.shape} do not match capsule weights {params.W.shape}")
    m = tn.transpose(heads, (1, 0, 2))                                       # (R, B, D)
    w = tn.transpose(params.W, (1, 2, 0, 3)).reshape(R, D, K * D_C)         # (R, D, K*D_C)
    u = tn.matmul(m, w).reshape(R, B, K, D_C)
    return tn.transpose(u, (1, 2, 0, 3))


def _weighted_sum(c: Tensor, u_hat: Tensor) -> Tensor:
    """s[b, k] = sum_r c[b, k, r] * u_hat[b, k, r]."""
    B, K, R, D_C = u_hat.shape
    s = tn.matmul(c.reshape(B * K, 1, R), u_hat.reshape(B * K, R, D_C))
    return s.reshape(B, K, D_C)


def dynamic_routing(heads, params: CapsuleParams, similarity=None) -> RoutingResult:
    """Route R head features into K class capsules.

    Coupling coefficients are a softmax over classes of logits that start at
    zero and grow by the agreement u_hat . v after every iteration. When a
    similarity matrix L (K x K_out) is given, the final pre-squash vectors are
    mixed as s'_j = sum_k L[k, j] s_k, yielding K_out activations.
    """
    heads = tn.constant(heads)
    single = heads.ndim == 2
    if single:
        heads = heads.reshape(1, *heads.shape)
    B = heads.shape[0]
    K, R = params.K, params.R
    u_hat = predictions(heads, params)
    logits = tn.constant(np.zeros((B, K, R)))
    for it in range(params.iterations):
        c = tn.softmax(logits, axis=1)
        s = _weighted_sum(c, u_hat)
        v = squash(s)
        if it < params.iterations - 1:
            agree = tn.matmul(u_hat.reshape(B * K, R, params.D_C), v.reshape(B * K, params.D_C, 1))
            logits = logits + agree.reshape(B, K, R)
    if similarity is not None:
        L = tn.constant(similarity)
        if L.ndim != 2 or L.shape[0] != K:
            raise ShapeError(f"similarity matrix {L.shape} incompatible with K={K}")
        mixed = tn.matmul(tn.transpose(s, (0, 2, 1)).reshape(B * params.D_C, K), L)
        s = tn.transpose(mixed.reshape(B, params.D_C, L.shape[1]), (0, 2, 1))
        v = squash(s)
    norms = tn.l2norm(v, axis=-1)
    if single:
        return RoutingResult(v[0], norms[0], c[0], u_hat[0])
    return RoutingResult(v, norms, c, u_hat)


def cosine_matrix(u: Tensor, labels: Tensor) -> Tensor:
    """Cosines between each row of u (B, D) and each row of labels (K, D) -> (B, K)."""
    u, labels = tn.constant(u), tn.constant(labels)
    un = tn.l2norm(u, axis=1)
    ln = tn.l2norm(labels, axis=1)
    if np.any(un.data == 0) or np.any(ln.data == 0):
        raise ValueError("cosine of a zero-norm representation is undefined")
    u_unit = tn.div(u, tn.expand(un, u.shape[1], axis=1))
    l_unit = tn.div(labels, tn.expand(ln, labels.shape[1], axis=1))
    return u_unit @ tn.transpose(l_unit)


def compatibility_scores(u_rep, label_reps) -> Tensor:
    """Cosine similarity of one utterance vector with each of K label vectors."""
    u = tn.constant(u_rep)
    return cosine_matrix(u.reshape(1, u.shape[0]), label_reps)[0]
