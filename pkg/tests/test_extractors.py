import numpy as np
import pytest

from dir_intent import tensor as tn
from dir_intent.corpus import EmbeddingTable, augment_label_pseudo_utterances
from dir_intent.extractors import (Batch, ExtractorConfig, birnn_attention_extract, build_extractor,
                                   cnn_extract, embed, mean_pool_tanh_extract)
from dir_intent.gradcheck import check_gradients
from dir_intent.training import DIRModel, TrainConfig, load_dataset


def table_from(vectors: dict) -> EmbeddingTable:
    dim = len(next(iter(vectors.values())))
    return EmbeddingTable(dim, {k: np.asarray(v, dtype=float) for k, v in vectors.items()})


def random_table(rng, words, dim):
    return table_from({w: rng.uniform(-1, 1, dim) for w in words})


def test_mean_pool_tanh_examples(rng):
    ext = build_extractor(ExtractorConfig("mean-pool-tanh", d_e=3, d_h=3), rng)
    table = random_table(rng, ["a", "b"], 3)
    one = mean_pool_tanh_extract(["a"], table, ext).data
    two = mean_pool_tanh_extract(["a", "a"], table, ext).data
    assert np.allclose(one, two, atol=1e-15)

    ext.params["b"].data[:] = 0
    zero = table_from({"z": np.zeros(3)})
    assert np.array_equal(mean_pool_tanh_extract(["z"], zero, ext).data, np.zeros(3))

    ext.params["W"].data = np.eye(3)
    e = table.lookup("b")
    assert np.allclose(mean_pool_tanh_extract(["b"], table, ext).data, np.tanh(e), atol=1e-15)


def test_cnn_shapes_and_zero_input(rng):
    cfg = ExtractorConfig("cnn", d_e=4, d_h=5, widths=(2, 3), channels=3)
    ext = build_extractor(cfg, rng)
    table = random_table(rng, list("abcde"), 4)
    H, pooled = cnn_extract(list("abcde"), table, ext)
    assert H.shape == (5, 5) and pooled.shape == (5,)
    H1, pooled1 = cnn_extract(["a"], table, ext)  # shorter than the widest kernel
    assert H1.shape == (1, 5)

    for name, p in ext.params.items():
        if name.endswith(".b"):
            p.data[:] = 0
    zero = table_from({"z": np.zeros(4)})
    assert np.array_equal(cnn_extract(["z", "z"], zero, ext)[1].data, np.zeros(5))


def test_cnn_degenerate_configuration_is_relu_of_embeddings(rng):
    """One filter, width 1, identity weights: conv map equals relu(e) per step."""
    d = 3
    ext = build_extractor(ExtractorConfig("cnn", d_e=d, d_h=d, widths=(1,), channels=d), rng)
    ext.params["conv1.W"].data = np.eye(d)
    ext.params["conv1.b"].data[:] = 0
    table = table_from({"a": [1.0, -2.0, 0.5], "b": [-1.0, 3.0, -0.5]})
    ids = {"a": 1, "b": 2}
    mat = np.vstack([np.zeros(d), table.matrix(["a", "b"])])
    batch = Batch.from_sequences([[ids["a"], ids["b"]]])
    feats = ext(embed(batch, tn.constant(mat)), batch)
    expect = np.maximum(mat[1:], 0)
    assert np.array_equal(feats.extras["conv"].data[0], expect)
    # hand trace of the pooled output
    pooled = np.tanh(expect.max(axis=0) @ ext.params["proj.W"].data + ext.params["proj.b"].data)
    assert np.allclose(feats.pooled.data[0], pooled, atol=1e-15)


def test_birnn_attention_rows_and_shapes(rng):
    cfg = ExtractorConfig("birnn-attention", d_e=4, d_h=6, heads=3, attn_dim=5)
    ext = build_extractor(cfg, rng)
    table = random_table(rng, list("abcd"), 4)
    heads, A = birnn_attention_extract(list("abcd"), table, ext)
    assert heads.shape == (3, 6) and A.shape == (3, 4)
    assert np.allclose(A.data.sum(axis=1), 1.0, atol=1e-12)


def test_single_head_over_identical_states_returns_that_state(rng):
    cfg = ExtractorConfig("birnn-attention", d_e=2, d_h=4, heads=1, attn_dim=3)
    ext = build_extractor(cfg, rng)
    h = rng.normal(size=4)
    H = tn.constant(np.tile(h, (1, 5, 1)))
    heads, A = ext.attend(H, np.ones((1, 5)))
    assert np.allclose(heads.data[0, 0], h, atol=1e-12)


def test_birnn_is_order_sensitive(rng):
    cfg = ExtractorConfig("birnn-attention", d_e=3, d_h=4, heads=2, attn_dim=3)
    for seed in range(5):
        r = np.random.default_rng(seed)
        ext = build_extractor(cfg, r)
        table = random_table(r, list("abc"), 3)
        mat = np.vstack([np.zeros(3), table.matrix(list("abc"))])
        fwd = Batch.from_sequences([[1, 2, 3]])
        rev = Batch.from_sequences([[3, 2, 1]])
        H1 = ext.encode(embed(fwd, tn.constant(mat)), fwd).data
        H2 = ext.encode(embed(rev, tn.constant(mat)), rev).data
        assert not np.allclose(H1, H2)


@pytest.mark.parametrize("kind", ["mean-pool-tanh", "cnn", "lstm", "birnn-attention"])
def test_padding_does_not_change_real_positions(kind, rng):
    cfg = ExtractorConfig(kind, d_e=3, d_h=4, heads=2, attn_dim=3, widths=(1, 2), channels=2)
    ext = build_extractor(cfg, rng)
    mat = np.vstack([np.zeros(3), rng.normal(size=(4, 3))])
    alone = Batch.from_sequences([[1, 2]])
    padded = Batch.from_sequences([[1, 2], [1, 2, 3, 4]])
    a = ext(embed(alone, tn.constant(mat)), alone)
    b = ext(embed(padded, tn.constant(mat)), padded)
    assert np.allclose(a.pooled.data[0], b.pooled.data[0], atol=1e-12)
    if a.heads is not None:
        assert np.allclose(a.heads.data[0], b.heads.data[0], atol=1e-12)


@pytest.mark.parametrize("kind", ["mean-pool-tanh", "cnn", "lstm", "birnn-attention"])
@pytest.mark.parametrize("seed", range(3))
def test_extractor_gradients(kind, seed):
    r = np.random.default_rng(seed)
    cfg = ExtractorConfig(kind, d_e=3, d_h=4, heads=2, attn_dim=3, widths=(1, 2), channels=2)
    ext = build_extractor(cfg, r)
    table = tn.Tensor(r.uniform(-1, 1, size=(5, 3)), requires_grad=True)
    batch = Batch.from_sequences([[1, 2, 3], [4, 1]])
    w = r.normal(size=4)

    def loss():
        f = ext(embed(batch, table), batch)
        out = f.pooled if f.heads is None else tn.mean(f.heads, axis=1)
        return tn.sum_(out @ w[:, None])

    params = list(ext.params.values()) + [table]
    assert check_gradients(loss, params, rng=r) < 1e-4


def test_label_names_share_the_utterance_code_path(small_synthetic_dir):
    d = small_synthetic_dir
    cfg = TrainConfig(dataset=str(d / "data.jsonl"), labels=str(d / "labels.json"),
                      embeddings=str(d / "embeddings.txt"), method="compat-dnn", d_h=4, epochs=1)
    data = load_dataset(cfg)
    model = DIRModel(cfg, data.labels, data.vocab, data.pretrained())
    name = data.labels.unseen[0]
    pseudo = [u for u in augment_label_pseudo_utterances(data.train, data.labels) if u.label == name][0]
    assert np.array_equal(model.represent([pseudo])[0],
                          model.features([data.labels.name_tokens(name)]).pooled.data[0])
