"""Feature extractors turning token sequences into hidden states.

All extractors work on a padded :class:`Batch`. Padding never changes the
values at real positions, so a sequence encoded alone and the same sequence
encoded inside a batch give the same numbers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import tensor as tn
from .tensor import Tensor

KINDS = ("mean-pool-tanh", "cnn", "lstm", "birnn-attention")

_NEG_INF = -1e30


@dataclass
class ExtractorConfig:
    kind: str = "cnn"
    d_e: int = 100
    d_h: int = 128
    heads: int = 3
    attn_dim: int = 64
    widths: tuple = (2, 3, 4)
    channels: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown extractor kind {self.kind!r}; expected one of {KINDS}")
        if self.d_h <= 0 or self.d_e <= 0:
            raise ValueError("d_h and d_e must be positive")
        if self.kind == "birnn-attention":
            if self.heads < 1:
                raise ValueError("birnn-attention needs at least one head")
            if self.d_h % 2:
                raise ValueError("birnn-attention needs an even d_h (two directions)")
        self.widths = tuple(int(w) for w in self.widths)


@dataclass
class Batch:
    ids: np.ndarray
    lengths: np.ndarray

    @classmethod
    def from_sequences(cls, seqs: Sequence[Sequence[int]]) -> "Batch":
        lengths = np.array([len(s) for s in seqs], dtype=np.int64)
        if len(seqs) == 0 or lengths.min() < 1:
            raise ValueError("every sequence in a batch needs at least one token")
        ids = np.zeros((len(seqs), int(lengths.max())), dtype=np.int64)
        for row, seq in enumerate(seqs):
            ids[row, : len(seq)] = seq
        return cls(ids, lengths)

    @property
    def size(self) -> int:
        return self.ids.shape[0]

    @property
    def mask(self) -> np.ndarray:
        steps = np.arange(self.ids.shape[1])
        return (steps[None, :] < self.lengths[:, None]).astype(tn.default_dtype())


@dataclass
class Features:
    H: Tensor
    mask: np.ndarray
    pooled: Tensor | None = None
    heads: Tensor | None = None
    attention: Tensor | None = None
    extras: dict = field(default_factory=dict)


def init_uniform(rng: np.random.Generator, shape, fan_in: int, name: str) -> Tensor:
    bound = 1.0 / np.sqrt(fan_in)
    return tn.Tensor(rng.uniform(-bound, bound, size=shape).astype(tn.default_dtype()),
                     requires_grad=True, name=name)


def embed(batch: Batch, table: Tensor) -> Tensor:
    """Look up embeddings for a batch; padded positions are forced to zero."""
    B, T = batch.ids.shape
    x = tn.take_rows(table, batch.ids.reshape(-1)).reshape(B, T, table.shape[1])
    mask3 = np.repeat(batch.mask[:, :, None], table.shape[1], axis=2)
    return tn.mul(x, mask3)


def masked_mean_time(H: Tensor, mask: np.ndarray) -> Tensor:
    """Average hidden states over real time steps: (B, T, D) -> (B, D)."""
    D = H.shape[2]
    mask3 = np.repeat(mask[:, :, None], D, axis=2)
    lengths = np.repeat(mask.sum(axis=1)[:, None], D, axis=1)
    return tn.div(tn.sum_(tn.mul(H, mask3), axis=1), lengths)


class Extractor:
    kind = ""

    def __init__(self, cfg: ExtractorConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.params: dict[str, Tensor] = {}

    def _param(self, rng, name, shape, fan_in):
        p = init_uniform(rng, shape, fan_in, f"{self.kind}.{name}")
        self.params[name] = p
        return p

    def __call__(self, x: Tensor, batch: Batch) -> Features:
        raise NotImplementedError


class MeanPoolTanh(Extractor):
    """tanh(W_p . mean(embeddings) + b_p)."""

    kind = "mean-pool-tanh"

    def __init__(self, cfg, rng):
        super().__init__(cfg, rng)
        self._param(rng, "W", (cfg.d_e, cfg.d_h), cfg.d_e)
        self._param(rng, "b", (cfg.d_h,), cfg.d_e)

    def __call__(self, x, batch):
        avg = masked_mean_time(x, batch.mask)
        pooled = tn.tanh(tn.add_bias(avg @ self.params["W"], self.params["b"]))
        H = pooled.reshape(batch.size, 1, self.cfg.d_h)
        return Features(H=H, mask=np.ones((batch.size, 1), dtype=tn.default_dtype()), pooled=pooled)


class CNN(Extractor):
    """Text CNN: per-width convolutions, relu, max over time, tanh projection.

    Windows start at each token and run right, with zeros past the end.
    """

    kind = "cnn"

    def __init__(self, cfg, rng):
        super().__init__(cfg, rng)
        for w in cfg.widths:
            self._param(rng, f"conv{w}.W", (w * cfg.d_e, cfg.channels), w * cfg.d_e)
            self._param(rng, f"conv{w}.b", (cfg.channels,), w * cfg.d_e)
        n = len(cfg.widths) * cfg.channels
        self._param(rng, "proj.W", (n, cfg.d_h), n)
        self._param(rng, "proj.b", (cfg.d_h,), n)

    def __call__(self, x, batch):
        B, T, D = x.shape
        span = max(self.cfg.widths)
        padded = tn.concat([x, np.zeros((B, span - 1, D))], axis=1) if span > 1 else x
        maps = []
        for w in self.cfg.widths:
            window = tn.concat([padded[:, j:j + T, :] for j in range(w)], axis=2) if w > 1 else padded[:, :T, :]
            conv = window.reshape(B * T, w * D) @ self.params[f"conv{w}.W"]
            maps.append(tn.relu(tn.add_bias(conv, self.params[f"conv{w}.b"])).reshape(B, T, self.cfg.channels))
        F = maps[0] if len(maps) == 1 else tn.concat(maps, axis=2)
        n = F.shape[2]
        W, b = self.params["proj.W"], self.params["proj.b"]
        H = tn.tanh(tn.add_bias(F.reshape(B * T, n) @ W, b)).reshape(B, T, self.cfg.d_h)
        # relu maps are >= 0, so zeroing pads leaves the max over real steps intact
        masked = tn.mul(F, np.repeat(batch.mask[:, :, None], n, axis=2))
        pooled = tn.tanh(tn.add_bias(tn.max_(masked, axis=1) @ W, b))
        return Features(H=H, mask=batch.mask, pooled=pooled, extras={"conv": F})


def _lstm_params(ext: Extractor, rng, prefix: str, d_in: int, hidden: int) -> None:
    ext._param(rng, f"{prefix}.Wx", (d_in, 4 * hidden), d_in)
    ext._param(rng, f"{prefix}.Wh", (hidden, 4 * hidden), hidden)
    ext._param(rng, f"{prefix}.b", (4 * hidden,), hidden)


def run_lstm(x: Tensor, mask: np.ndarray, Wx: Tensor, Wh: Tensor, b: Tensor, reverse: bool = False) -> Tensor:
    """Gated recurrence over (B, T, D_in); returns hidden states (B, T, h).

    Padded steps carry the previous state through unchanged, so the reverse
    direction starts from a zero state at each sequence's last real token.
    """
    B, T, D = x.shape
    h = Wh.shape[0]
    xw = tn.add_bias(x.reshape(B * T, D) @ Wx, b).reshape(B, T, 4 * h)
    xw = tn.transpose(xw, (1, 0, 2))
    state_h = tn.constant(np.zeros((B, h)))
    state_c = tn.constant(np.zeros((B, h)))
    outputs = [None] * T
    steps = range(T - 1, -1, -1) if reverse else range(T)
    for t in steps:
        z = xw[t] + state_h @ Wh
        i = tn.sigmoid(z[:, :h])
        f = tn.sigmoid(z[:, h:2 * h])
        g = tn.tanh(z[:, 2 * h:3 * h])
        o = tn.sigmoid(z[:, 3 * h:])
        c_new = f * state_c + i * g
        h_new = o * tn.tanh(c_new)
        m = np.repeat(mask[:, t:t + 1], h, axis=1)
        if m.all():
            state_c, state_h = c_new, h_new
        else:
            keep = 1.0 - m
            state_c = c_new * m + state_c * keep
            state_h = h_new * m + state_h * keep
        outputs[t] = state_h
    return tn.stack(outputs, axis=1)


class LSTM(Extractor):
    """Uni-directional gated recurrence; H has D_H units per step."""

    kind = "lstm"

    def __init__(self, cfg, rng):
        super().__init__(cfg, rng)
        _lstm_params(self, rng, "fw", cfg.d_e, cfg.d_h)

    def __call__(self, x, batch):
        p = self.params
        H = run_lstm(x, batch.mask, p["fw.Wx"], p["fw.Wh"], p["fw.b"])
        return Features(H=H, mask=batch.mask, pooled=masked_mean_time(H, batch.mask))


class BiRNNAttention(Extractor):
    """Bidirectional recurrence followed by R-head self-attention.

    A = softmax_rows(W2 . tanh(W1 . H^T)) and head r is m_r = A_r . H.
    """

    kind = "birnn-attention"

    def __init__(self, cfg, rng):
        super().__init__(cfg, rng)
        half = cfg.d_h // 2
        _lstm_params(self, rng, "fw", cfg.d_e, half)
        _lstm_params(self, rng, "bw", cfg.d_e, half)
        self._param(rng, "attn.W1", (cfg.d_h, cfg.attn_dim), cfg.d_h)
        self._param(rng, "attn.W2", (cfg.attn_dim, cfg.heads), cfg.attn_dim)

    def encode(self, x, batch) -> Tensor:
        p = self.params
        fw = run_lstm(x, batch.mask, p["fw.Wx"], p["fw.Wh"], p["fw.b"])
        bw = run_lstm(x, batch.mask, p["bw.Wx"], p["bw.Wh"], p["bw.b"], reverse=True)
        return tn.concat([fw, bw], axis=2)

    def attend(self, H: Tensor, mask: np.ndarray) -> tuple[Tensor, Tensor]:
        B, T, D = H.shape
        R = self.cfg.heads
        scores = tn.tanh(H.reshape(B * T, D) @ self.params["attn.W1"]) @ self.params["attn.W2"]
        scores = tn.transpose(scores.reshape(B, T, R), (0, 2, 1))
        if not mask.all():
            pad = np.repeat(((1.0 - mask) * _NEG_INF)[:, None, :], R, axis=1)
            scores = scores + pad
        A = tn.softmax(scores, axis=-1)
        return A @ H, A

    def __call__(self, x, batch):
        H = self.encode(x, batch)
        heads, A = self.attend(H, batch.mask)
        return Features(H=H, mask=batch.mask, pooled=tn.mean(heads, axis=1), heads=heads, attention=A)


_REGISTRY = {cls.kind: cls for cls in (MeanPoolTanh, CNN, LSTM, BiRNNAttention)}


def build_extractor(cfg: ExtractorConfig, rng: np.random.Generator | None = None) -> Extractor:
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    return _REGISTRY[cfg.kind](cfg, rng)


# single-sequence conveniences -------------------------------------------------

def _single(ext: Extractor, tokens, vocab_index: dict, table_matrix: np.ndarray) -> Features:
    ids = [vocab_index[t] for t in tokens]
    batch = Batch.from_sequences([ids])
    return ext(embed(batch, tn.constant(table_matrix)), batch)


def _lookup_matrix(tokens, table) -> tuple[dict, np.ndarray]:
    vocab = ["<pad>"] + sorted(set(tokens))
    index = {t: i for i, t in enumerate(vocab)}
    mat = np.vstack([np.zeros((1, table.dim)), table.matrix(vocab[1:])])
    return index, mat


def mean_pool_tanh_extract(tokens, table, ext: MeanPoolTanh) -> Tensor:
    index, mat = _lookup_matrix(tokens, table)
    return _single(ext, tokens, index, mat).pooled[0]


def cnn_extract(tokens, table, ext: CNN) -> tuple[Tensor, Tensor]:
    index, mat = _lookup_matrix(tokens, table)
    feats = _single(ext, tokens, index, mat)
    return feats.H[0], feats.pooled[0]


def birnn_attention_extract(tokens, table, ext: BiRNNAttention) -> tuple[Tensor, Tensor]:
    index, mat = _lookup_matrix(tokens, table)
    feats = _single(ext, tokens, index, mat)
    return feats.heads[0], feats.attention[0]
