"""Model assembly, optimisation and the model artifact format."""

from __future__ import annotations

import base64
import dataclasses
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import tensor as tn
from .classifiers import CapsuleParams, cosine_matrix, dynamic_routing
from .corpus import (LABEL_PSEUDO, EmbeddingTable, LabelSet, SplitSpec, Utterance,
                     augment_label_pseudo_utterances, build_vocab, load_corpus, load_embeddings,
                     make_split)
from .errors import ConfigError, DataError, NumericalError
from .extractors import Batch, ExtractorConfig, build_extractor, embed, init_uniform, masked_mean_time
from .inference import LofGate, LofModel
from .objectives import (LossConfig, compatibility_multitask, lmcl_loss, margin_multitask,
                         multitask_cross_entropy, nll, suid_aggregate, suid_targets)
from .similarity import (IntentRepresentations, SimilarityConfig, average_by_intent,
                         identity_similarity, similarity_from_vectors)
from .tensor import Tensor

logger = logging.getLogger(__name__)

METHODS = ("linear", "capsule", "compat-dnn", "compat-cdssm")
DEFAULT_EXTRACTOR = {"linear": "cnn", "capsule": "birnn-attention",
                     "compat-dnn": "mean-pool-tanh", "compat-cdssm": "cnn"}
SIMILARITY_SOURCES = ("ss", "es", "identity")
ABLATIONS = ("no-mt", "no-ss", "es")

ARTIFACT_FORMAT = "dir-intent-model"
ARTIFACT_VERSION = 1


@dataclass
class TrainConfig:
    # data
    dataset: str | None = None
    labels: str | None = None
    embeddings: str | None = None
    mode: str = "gzsid"
    train_ratio: float = 0.7
    # model
    method: str = "linear"
    extractor: str | None = None
    d_e: int = 100
    d_h: int = 128
    heads: int = 3
    attn_dim: int = 64
    widths: tuple = (2, 3, 4)
    channels: int = 64
    capsule_dim: int = 16
    routing_iters: int = 3
    freeze_embeddings: bool = True
    oov: str = "zeros"
    oov_seed: int = 0
    # optimisation
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    dtype: str = "float64"
    # objectives
    augment: bool = True
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
    # similarity scorer
    similarity: str = "ss"
    sigma: float = 1.0
    kernel: str = "exp-neg"
    tau: float | None = None
    row_normalize: bool = True
    # two-stage pipeline
    two_stage: bool = False
    lmcl_scale: float = 30.0
    lmcl_margin: float = 0.35
    lof_k: int = 20
    lof_quantile: float = 0.95

    def __post_init__(self):
        self.widths = tuple(int(w) for w in self.widths)
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.extractor is None:
            self.extractor = DEFAULT_EXTRACTOR[self.method]
        if self.method == "capsule" and self.extractor != "birnn-attention":
            raise ConfigError("the capsule method needs the birnn-attention extractor")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be at least 1")
        if self.similarity not in SIMILARITY_SOURCES:
            raise ConfigError(f"similarity must be one of {SIMILARITY_SOURCES}")
        if self.mode not in ("zsid", "gzsid"):
            raise ConfigError("mode must be zsid or gzsid")
        if self.dtype not in ("float64", "float32"):
            raise ConfigError("dtype must be float64 or float32")
        try:
            self.loss_config()
            self.similarity_config()
            self.extractor_config(self.d_e)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def loss_config(self) -> LossConfig:
        return LossConfig(self.alpha, self.lam, self.lam_prime, self.m_plus, self.m_minus,
                          self.m_prime_plus, self.m_prime_minus, self.attn_penalty, self.gamma,
                          self.compat_scale)

    def similarity_config(self) -> SimilarityConfig:
        return SimilarityConfig(self.sigma, self.kernel, self.tau, self.row_normalize)

    def extractor_config(self, d_e: int) -> ExtractorConfig:
        return ExtractorConfig(self.extractor, d_e, self.d_h, self.heads, self.attn_dim,
                               self.widths, self.channels, self.seed)

    def split_spec(self) -> SplitSpec:
        return SplitSpec(self.mode, self.train_ratio, self.seed)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["widths"] = list(self.widths)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        valid = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - valid)
        if unknown:
            raise ConfigError(f"unknown config keys {unknown}; valid keys: {sorted(valid)}")
        return cls(**d)


def ablation_variant(cfg: TrainConfig, flags: Sequence[str]) -> TrainConfig:
    """Apply training ablations: no-mt, no-ss, es (the last two are exclusive)."""
    flags = set(flags or ())
    bad = flags - set(ABLATIONS)
    if bad:
        raise ConfigError(f"unknown ablation {sorted(bad)}; expected {ABLATIONS}")
    if {"no-ss", "es"} <= flags:
        raise ConfigError("ablations no-ss and es are mutually exclusive")
    changes = {}
    if "no-mt" in flags:
        changes.update(alpha=0.0, lam_prime=0.0)
    if "no-ss" in flags:
        changes["similarity"] = "identity"
    if "es" in flags:
        changes["similarity"] = "es"
    return dataclasses.replace(cfg, **changes)


# --------------------------------------------------------------------------
# models

class Encoder:
    """Embedding lookup plus a feature extractor, shared by both model kinds."""

    def __init__(self, cfg: TrainConfig, vocab: Sequence[str], pretrained: np.ndarray,
                 rng: np.random.Generator):
        self.cfg = cfg
        self.vocab = list(vocab)
        self.index = {t: i for i, t in enumerate(self.vocab)}
        self.pretrained = np.asarray(pretrained, dtype=tn.default_dtype())
        self.embedding = Tensor(self.pretrained.copy(), requires_grad=not cfg.freeze_embeddings,
                                name="embedding")
        self.extractor = build_extractor(cfg.extractor_config(self.pretrained.shape[1]), rng)
        self._oov = EmbeddingTable(self.pretrained.shape[1], oov=cfg.oov, seed=cfg.oov_seed)
        self._extra: dict[str, int] = {}
        self._extra_rows: list[np.ndarray] = []

    def parameters(self) -> dict[str, Tensor]:
        out = {}
        if self.embedding.requires_grad:
            out["embedding"] = self.embedding
        out.update((f"extractor.{k}", v) for k, v in self.extractor.params.items())
        return out

    def _ids(self, tokens) -> list[int]:
        ids = []
        for t in tokens:
            i = self.index.get(t)
            if i is None:
                i = self._extra.get(t)
                if i is None:
                    i = len(self.vocab) + len(self._extra_rows)
                    self._extra[t] = i
                    self._extra_rows.append(self._oov.lookup(t))
            ids.append(i)
        return ids

    def _table(self) -> Tensor:
        if not self._extra_rows:
            return self.embedding
        return tn.concat([self.embedding, np.stack(self._extra_rows)], axis=0)

    def features(self, token_seqs):
        batch = Batch.from_sequences([self._ids(t) for t in token_seqs])
        return self.extractor(embed(batch, self._table()), batch)

    def sentence(self, feats) -> Tensor:
        """Utterance representation: mean over heads if present, else over time."""
        if feats.heads is not None:
            return tn.mean(feats.heads, axis=1)
        return masked_mean_time(feats.H, feats.mask)


class DIRModel(Encoder):
    """Extractor + classifier over K intents, plus the frozen similarity scorer state."""

    def __init__(self, cfg: TrainConfig, labels: LabelSet, vocab, pretrained):
        tn.set_default_dtype(cfg.dtype)
        rng = np.random.default_rng(cfg.seed)
        super().__init__(cfg, vocab, pretrained, rng)
        self.labels = labels
        self.loss_cfg = cfg.loss_config()
        self.head: dict[str, Tensor] = {}
        K, D = labels.K, cfg.d_h
        if cfg.method == "linear":
            self.head["W"] = init_uniform(rng, (D, K), D, "head.W")
        elif cfg.method == "capsule":
            self.head["W"] = init_uniform(rng, (K, cfg.heads, D, cfg.capsule_dim), D, "head.W")
        self.label_tokens = [labels.name_tokens(n) for n in labels.names]
        self.representations = None
        self.L: dict[str, np.ndarray | None] = {"zsl": None, "gzsl": None}
        self.loss_trace: list[float] = []
        self.stage1: Stage1Model | None = None

    @property
    def inductive(self) -> bool:
        return not self.cfg.augment or self.labels.J == 0

    def parameters(self) -> dict[str, Tensor]:
        out = super().parameters()
        out.update((f"head.{k}", v) for k, v in self.head.items())
        return out

    def capsule_params(self) -> CapsuleParams:
        return CapsuleParams(self.head["W"], self.cfg.routing_iters)

    def sentence(self, feats) -> Tensor:
        if self.cfg.method.startswith("compat"):
            return feats.pooled
        return super().sentence(feats)

    def forward(self, token_seqs):
        """Return (scores (B, K), features). Scores are logits, capsule norms or cosines."""
        feats = self.features(token_seqs)
        method = self.cfg.method
        if method == "linear":
            return masked_mean_time(feats.H, feats.mask) @ self.head["W"], feats
        if method == "capsule":
            return dynamic_routing(feats.heads, self.capsule_params()).norms, feats
        label_feats = self.features(self.label_tokens)
        return cosine_matrix(feats.pooled, label_feats.pooled), feats

    def batch_loss(self, utts: Sequence[Utterance]) -> Tensor:
        I, J = self.labels.I, self.labels.J
        targets = np.array([self.labels.index(u.label) for u in utts], dtype=np.int64)
        suid = suid_targets(targets, I)
        scores, feats = self.forward([u.tokens for u in utts])
        cfg = self.loss_cfg
        method = self.cfg.method
        if self.inductive:
            if (targets >= I).any():
                raise DataError("class-inductive training received unseen-intent utterances")
            scores = scores[:, :I]
        if method == "linear":
            if self.inductive:
                return nll(tn.softmax(scores, axis=1), targets)
            p = tn.softmax(scores, axis=1)
            return multitask_cross_entropy(p, targets, suid_aggregate(p, I, J, "linear-prob"), suid, cfg.alpha)
        if method == "capsule":
            P = None if self.inductive else suid_aggregate(scores, I, J, "capsule-norm")
            return margin_multitask(scores, targets, P, suid, feats.attention, cfg)
        kind = "margin" if method == "compat-dnn" else "cross-entropy"
        P = None if self.inductive else suid_aggregate(scores, I, J, "compat-binary-softmax")
        return compatibility_multitask(scores, targets, P, suid, cfg, kind)

    # ---- frozen-model utilities -------------------------------------------------

    def represent(self, utts, chunk: int = 256) -> np.ndarray:
        out = [self.sentence(self.features([u.tokens for u in utts[i:i + chunk]])).data
               for i in range(0, len(utts), chunk)]
        return np.concatenate(out, axis=0)

    def pretrained_label_vectors(self) -> np.ndarray:
        return np.stack([self.pretrained[[self.index[t] for t in toks]].mean(axis=0)
                         for toks in self.label_tokens])

    def similarity_matrix(self, mode: str, source: str | None = None) -> np.ndarray:
        source = source or self.cfg.similarity
        if source == "identity":
            return identity_similarity(self.labels.K, self.labels.I, mode)
        if source == "es":
            return similarity_from_vectors(self.pretrained_label_vectors(), self.labels.I, mode,
                                           self.cfg.similarity_config())
        L = self.L.get(mode)
        if L is None:
            raise ConfigError("no learned similarity matrix: the model was trained without "
                              "label-name augmentation; use --ablate es or --ablate no-ss")
        return L

    def scores(self, utts, mode: str, source: str | None = None, chunk: int = 256) -> np.ndarray:
        """Inference scores over the candidate space (J for zsid, K for gzsid)."""
        zsl = "zsl" if mode == "zsid" else "gzsl"
        I = self.labels.I
        compat = self.cfg.method.startswith("compat")
        L = None if compat else self.similarity_matrix(zsl, source)
        label_pooled = self.features(self.label_tokens).pooled if compat else None
        out = []
        for i in range(0, len(utts), chunk):
            feats = self.features([u.tokens for u in utts[i:i + chunk]])
            if self.cfg.method == "linear":
                logits = masked_mean_time(feats.H, feats.mask) @ self.head["W"]
                out.append(tn.softmax(logits @ L, axis=1).data)
            elif self.cfg.method == "capsule":
                out.append(dynamic_routing(feats.heads, self.capsule_params(), similarity=L).norms.data)
            else:
                S = cosine_matrix(feats.pooled, label_pooled).data
                out.append(S[:, I:] if zsl == "zsl" else S)
        return np.concatenate(out, axis=0)

    def predict(self, utts, mode: str, source: str | None = None) -> np.ndarray:
        offset = self.labels.I if mode == "zsid" else 0
        return offset + np.argmax(self.scores(utts, mode, source), axis=1)


class Stage1Model(Encoder):
    """Seen-intent classifier trained with the large-margin cosine loss; gates via LOF."""

    def __init__(self, cfg: TrainConfig, labels: LabelSet, vocab, pretrained):
        rng = np.random.default_rng([cfg.seed, 7])
        super().__init__(cfg, vocab, pretrained, rng)
        self.labels = labels
        self.W = init_uniform(rng, (cfg.d_h, labels.I), cfg.d_h, "stage1.W")
        self.gate: LofGate | None = None

    def parameters(self) -> dict[str, Tensor]:
        out = super().parameters()
        out["W"] = self.W
        return out

    def batch_loss(self, utts) -> Tensor:
        targets = np.array([self.labels.index(u.label) for u in utts], dtype=np.int64)
        feats = self.sentence(self.features([u.tokens for u in utts]))
        return lmcl_loss(feats, targets, self.W, self.cfg.lmcl_scale, self.cfg.lmcl_margin)

    def encode(self, utts, chunk: int = 256) -> tuple[np.ndarray, np.ndarray]:
        """Return (features, seen-intent cosine scores)."""
        feats, scores = [], []
        for i in range(0, len(utts), chunk):
            f = self.sentence(self.features([u.tokens for u in utts[i:i + chunk]]))
            feats.append(f.data)
            scores.append(cosine_matrix(f, tn.transpose(self.W)).data)
        return np.concatenate(feats), np.concatenate(scores)


# --------------------------------------------------------------------------
# optimisation

class Adam:
    def __init__(self, params: Sequence[Tensor], lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def step(self, grads: Sequence[np.ndarray]) -> None:
        self.t += 1
        c1 = 1 - self.beta1 ** self.t
        c2 = 1 - self.beta2 ** self.t
        for i, (p, g) in enumerate(zip(self.params, grads)):
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * g * g
            p.data = p.data - self.lr * (self.m[i] / c1) / (np.sqrt(self.v[i] / c2) + self.eps)


def optimise(model, items: Sequence[Utterance], cfg: TrainConfig, tag: str = "train") -> list[float]:
    """Mini-batch Adam over ``model.batch_loss``; returns the per-epoch mean loss."""
    params = list(model.parameters().values())
    opt = Adam(params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon)
    rng = np.random.default_rng([cfg.seed, 1])
    trace = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(items))
        total = 0.0
        for b, start in enumerate(range(0, len(items), cfg.batch_size), 1):
            chunk = [items[i] for i in order[start:start + cfg.batch_size]]
            loss = model.batch_loss(chunk)
            value = loss.item()
            if not np.isfinite(value):
                raise NumericalError(f"{tag}: loss became {value} at epoch {epoch}, batch {b}")
            opt.step(tn.grads_for(loss, params))
            total += value * len(chunk)
        trace.append(total / len(items))
        logger.info("%s epoch %d/%d loss %.6f", tag, epoch, cfg.epochs, trace[-1])
    return trace


def prepare_training_set(train: Sequence[Utterance], labels: LabelSet, cfg: TrainConfig) -> list[Utterance]:
    return augment_label_pseudo_utterances(train, labels) if cfg.augment else list(train)


def train(train_set: Sequence[Utterance], labels: LabelSet, vocab, pretrained, cfg: TrainConfig) -> DIRModel:
    """Train a model and freeze its intent representations and similarity matrices."""
    items = prepare_training_set(train_set, labels, cfg)
    if not items:
        raise DataError("empty training set")
    model = DIRModel(cfg, labels, vocab, pretrained)
    model.loss_trace = optimise(model, items, cfg)
    targets = [labels.index(u.label) for u in items]
    if len(set(targets)) == labels.K:
        model.representations = average_by_intent(model.represent(items), targets, labels.K, labels.I)
        for mode in ("zsl", "gzsl"):
            model.L[mode] = similarity_from_vectors(model.representations.g, labels.I, mode,
                                                    cfg.similarity_config())
    else:
        logger.info("some intents have no training items; learned similarity matrices not built")
    if cfg.two_stage:
        model.stage1 = train_stage1(train_set, labels, vocab, pretrained, cfg)
    return model


def train_stage1(train_set, labels: LabelSet, vocab, pretrained, cfg: TrainConfig) -> Stage1Model:
    seen = [u for u in train_set if u.origin != LABEL_PSEUDO and labels.is_seen(u.label)]
    if len(seen) <= cfg.lof_k:
        raise DataError(f"LOF needs more than k={cfg.lof_k} seen training utterances, got {len(seen)}")
    model = Stage1Model(cfg, labels, vocab, pretrained)
    optimise(model, seen, cfg, tag="stage1")
    feats, _ = model.encode(seen)
    model.gate = LofGate.fit(feats, cfg.lof_k, cfg.lof_quantile)
    return model


# --------------------------------------------------------------------------
# data loading

@dataclass
class Dataset:
    corpus: list
    labels: LabelSet
    table: EmbeddingTable
    train: list
    test: list
    vocab: list = field(default_factory=list)

    def pretrained(self) -> np.ndarray:
        return np.vstack([np.zeros((1, self.table.dim)), self.table.matrix(self.vocab[1:])])


def load_dataset(cfg: TrainConfig, mode: str | None = None) -> Dataset:
    if not cfg.dataset or not cfg.labels:
        raise ConfigError("config needs both 'dataset' and 'labels' paths")
    corpus, labels = load_corpus(cfg.dataset, cfg.labels)
    if cfg.embeddings:
        table = load_embeddings(cfg.embeddings, oov=cfg.oov, seed=cfg.oov_seed)
    elif cfg.oov == "hashed-uniform":
        table = EmbeddingTable(cfg.d_e, oov=cfg.oov, seed=cfg.oov_seed)
    else:
        raise ConfigError("without an 'embeddings' file set oov: hashed-uniform")
    spec = cfg.split_spec() if mode is None else dataclasses.replace(cfg.split_spec(), mode=mode)
    train_set, test_set = make_split(corpus, labels, spec)
    return Dataset(corpus, labels, table, train_set, test_set, build_vocab(corpus, labels))


def train_from_config(cfg: TrainConfig) -> tuple[DIRModel, Dataset]:
    data = load_dataset(cfg)
    model = train(data.train, data.labels, data.vocab, data.pretrained(), cfg)
    return model, data


# --------------------------------------------------------------------------
# artifact

def _encode_array(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape), "dtype": "<f8", "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _decode_array(d: dict) -> np.ndarray:
    if d.get("dtype") != "<f8":
        raise DataError(f"unsupported tensor dtype {d.get('dtype')!r}")
    raw = base64.b64decode(d["data"])
    return np.frombuffer(raw, dtype="<f8").reshape(d["shape"]).astype(np.float64)


def model_to_dict(model: DIRModel) -> dict:
    tensors = {"pretrained": _encode_array(model.pretrained)}
    tensors.update((k, _encode_array(v.data)) for k, v in model.parameters().items())
    if model.representations is not None:
        tensors["reps.g"] = _encode_array(model.representations.g)
        tensors["reps.counts"] = _encode_array(model.representations.counts)
    for mode, L in model.L.items():
        if L is not None:
            tensors[f"L.{mode}"] = _encode_array(L)
    tensors["loss_trace"] = _encode_array(np.asarray(model.loss_trace))
    doc = {
        "format": ARTIFACT_FORMAT,
        "version": ARTIFACT_VERSION,
        "config": model.cfg.to_dict(),
        "labels": {"seen": list(model.labels.seen), "unseen": list(model.labels.unseen),
                   "keyword_overrides": dict(sorted(model.labels.keywords.items()))},
        "vocab": model.vocab,
        "tensors": tensors,
    }
    if model.stage1 is not None:
        s1 = model.stage1
        doc["stage1"] = {
            "tensors": {k: _encode_array(v.data) for k, v in s1.parameters().items()},
            "lof_reference": _encode_array(s1.gate.model.points),
            "lof_k": s1.gate.model.k,
            "threshold": _encode_array(np.asarray(s1.gate.threshold)),
        }
    return doc


def save_model(model: DIRModel, path) -> str:
    """Write the artifact and return its sha256."""
    payload = json.dumps(model_to_dict(model), sort_keys=True, separators=(",", ":")).encode()
    Path(path).write_bytes(payload)
    return hashlib.sha256(payload).hexdigest()


def _restore(params: dict, tensors: dict, where: str) -> None:
    for name, p in params.items():
        if name not in tensors:
            raise DataError(f"artifact is missing tensor {where}{name}")
        arr = _decode_array(tensors[name])
        if arr.shape != p.shape:
            raise DataError(f"tensor {where}{name} has shape {arr.shape}, expected {p.shape}")
        p.data = arr.astype(p.data.dtype)


def load_model(path) -> DIRModel:
    path = Path(path)
    if not path.exists():
        raise DataError(f"model artifact not found: {path}")
    doc = json.loads(path.read_bytes())
    if doc.get("format") != ARTIFACT_FORMAT:
        raise DataError(f"{path} is not a {ARTIFACT_FORMAT} artifact")
    if doc.get("version") != ARTIFACT_VERSION:
        raise DataError(f"unsupported artifact version {doc.get('version')}")
    cfg = TrainConfig.from_dict(doc["config"])
    lab = doc["labels"]
    labels = LabelSet(tuple(lab["seen"]), tuple(lab["unseen"]), dict(lab.get("keyword_overrides") or {}))
    tensors = doc["tensors"]
    pretrained = _decode_array(tensors["pretrained"])
    model = DIRModel(cfg, labels, doc["vocab"], pretrained)
    _restore(model.parameters(), tensors, "")
    if "reps.g" in tensors:
        counts = _decode_array(tensors["reps.counts"]).astype(np.int64)
        model.representations = IntentRepresentations(_decode_array(tensors["reps.g"]), counts, labels.I)
    for mode in ("zsl", "gzsl"):
        if f"L.{mode}" in tensors:
            model.L[mode] = _decode_array(tensors[f"L.{mode}"])
    model.loss_trace = _decode_array(tensors["loss_trace"]).tolist()
    if "stage1" in doc:
        s1doc = doc["stage1"]
        s1 = Stage1Model(cfg, labels, doc["vocab"], pretrained)
        _restore(s1.parameters(), s1doc["tensors"], "stage1.")
        s1.gate = LofGate(LofModel(_decode_array(s1doc["lof_reference"]), int(s1doc["lof_k"])),
                          float(_decode_array(s1doc["threshold"]).reshape(-1)[0]))
        model.stage1 = s1
    return model
