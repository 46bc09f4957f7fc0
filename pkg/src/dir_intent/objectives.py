"""Training objectives: intent loss plus the seen/unseen (SUID) auxiliary task.

Every loss takes batched inputs, scores of shape (B, K) and integer targets of
shape (B,), and returns the batch mean as a scalar tensor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as tn
from .classifiers import cosine_matrix
from .errors import ShapeError
from .tensor import Tensor

PROB_FLOOR = 1e-12


@dataclass
class LossConfig:
    alpha: float = 0.5
    lam: float = 0.5
    lam_prime: float = 0.5
    m_plus: float = 0.9
    m_minus: float = 0.1
    m_prime_plus: float = 0.9
    m_prime_minus: float = 0.1
    attn_penalty: float = 1e-2
    gamma: float = 0.1
    compat_scale: float = 1.0

    def __post_init__(self):
        if self.alpha < 0 or self.lam < 0 or self.lam_prime < 0:
            raise ValueError("down-weighting coefficients must be non-negative")
        if not self.m_plus > self.m_minus or not self.m_prime_plus > self.m_prime_minus:
            raise ValueError("upper margins must exceed lower margins")


def _batched(x) -> Tensor:
    x = tn.constant(x)
    return x.reshape(1, x.shape[0]) if x.ndim == 1 else x


def _targets(t, B: int) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, dtype=np.int64))
    if t.shape != (B,):
        raise ShapeError(f"expected {B} targets, got {t.shape}")
    return t


def _pick(x: Tensor, targets: np.ndarray) -> Tensor:
    return x[np.arange(x.shape[0]), targets]


def suid_targets(targets, I: int) -> np.ndarray:
    """0 for seen intents (index < I), 1 for unseen."""
    return (np.asarray(targets) >= I).astype(np.int64)


def suid_aggregate(scores, I: int, J: int, mode: str) -> Tensor:
    """Seen/unseen pair from K-way scores; returns (B, 2) (or (2,) for a vector).

    linear-prob:  sums of the first I and last J probabilities.
    capsule-norm: sums of the activation norms, unnormalised.
    compat-binary-softmax: binary softmax over the two sums of cosines.
    """
    raw = tn.constant(scores)
    S = _batched(raw)
    if S.shape[1] != I + J:
        raise ShapeError(f"I + J = {I + J} does not match {S.shape[1]} scores")
    pair = tn.stack([tn.sum_(S[:, :I], axis=1), tn.sum_(S[:, I:], axis=1)], axis=1)
    if mode == "compat-binary-softmax":
        pair = tn.softmax(pair, axis=1)
    elif mode not in ("linear-prob", "capsule-norm"):
        raise ValueError(f"unknown aggregation mode {mode!r}")
    return pair[0] if raw.ndim == 1 else pair


def nll(probs: Tensor, targets: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of the target entries, clamped at 1e-12."""
    return tn.neg(tn.mean(tn.log(tn.clamp_min(_pick(probs, targets), PROB_FLOOR))))


def multitask_cross_entropy(p, targets, P, suid, alpha: float) -> Tensor:
    """-log p_true - alpha * log P_true-suid (batch mean)."""
    p, P = _batched(p), _batched(P)
    targets = _targets(targets, p.shape[0])
    loss = nll(p, targets)
    if alpha:
        loss = loss + tn.scale(nll(P, _targets(suid, P.shape[0])), alpha)
    return loss


def _hinge_sq(x: Tensor) -> Tensor:
    return tn.square(tn.relu(x))


def _margin_terms(norms: Tensor, onehot: np.ndarray, m_pos: float, m_neg: float, lam: float) -> Tensor:
    pos = tn.mul(_hinge_sq(tn.sub(m_pos, norms)), onehot)
    neg = tn.mul(_hinge_sq(tn.sub(norms, m_neg)), 1.0 - onehot)
    return tn.add(tn.sum_(pos, axis=1), tn.scale(tn.sum_(neg, axis=1), lam))


def attention_penalty(A) -> Tensor:
    """||A A^T - I||_F^2 for (R, T) or the batch mean for (B, R, T)."""
    A = tn.constant(A)
    if A.ndim == 2:
        return tn.sum_(tn.square(A @ tn.transpose(A) - np.eye(A.shape[0])))
    B, R, _ = A.shape
    gram = tn.matmul(A, tn.transpose(A, (0, 2, 1)))
    eye = np.repeat(np.eye(R)[None], B, axis=0)
    return tn.mean(tn.sum_(tn.square(gram - eye).reshape(B, R * R), axis=1))


def margin_multitask(norms, targets, P, suid, A, cfg: LossConfig) -> Tensor:
    """Capsule max-margin loss with the SUID margin term and attention regulariser."""
    norms = _batched(norms)
    B, K = norms.shape
    targets = _targets(targets, B)
    per = _margin_terms(norms, np.eye(K)[targets], cfg.m_plus, cfg.m_minus, cfg.lam)
    if cfg.lam_prime and P is not None:
        P = _batched(P)
        pair_hot = np.eye(2)[_targets(suid, B)]
        per = per + tn.scale(_margin_terms(P, pair_hot, cfg.m_prime_plus, cfg.m_prime_minus, cfg.lam), cfg.lam_prime)
    loss = tn.mean(per)
    if A is not None and cfg.attn_penalty:
        loss = loss + tn.scale(attention_penalty(A), cfg.attn_penalty)
    return loss


def compatibility_multitask(S, targets, P, suid, cfg: LossConfig, kind: str = "cross-entropy") -> Tensor:
    """Intent loss over cosines plus alpha times the SUID log-loss.

    ``cross-entropy``: NLL of softmax(compat_scale * S).
    ``margin``: sum over negatives of max(0, gamma - S_true + S_neg).
    """
    S = _batched(S)
    B, K = S.shape
    targets = _targets(targets, B)
    if kind == "cross-entropy":
        logp = tn.log_softmax(tn.scale(S, cfg.compat_scale), axis=1)
        loss = tn.neg(tn.mean(_pick(logp, targets)))
    elif kind == "margin":
        true = tn.expand(_pick(S, targets), K, axis=1)
        hinge = tn.relu(tn.add(tn.sub(S, true), cfg.gamma))
        loss = tn.mean(tn.sum_(tn.mul(hinge, 1.0 - np.eye(K)[targets]), axis=1))
    else:
        raise ValueError(f"unknown intent loss kind {kind!r}")
    if cfg.alpha and P is not None:
        loss = loss + tn.scale(nll(_batched(P), _targets(suid, B)), cfg.alpha)
    return loss


def lmcl_loss(features, labels, weights, s: float = 30.0, m: float = 0.35) -> Tensor:
    """Large-margin cosine loss: CE over s * (cos - m * onehot)."""
    features = _batched(features)
    weights = tn.constant(weights)
    labels = _targets(labels, features.shape[0])
    cos = cosine_matrix(features, tn.transpose(weights))
    logits = tn.scale(tn.sub(cos, m * np.eye(cos.shape[1])[labels]), s)
    return tn.neg(tn.mean(_pick(tn.log_softmax(logits, axis=1), labels)))
