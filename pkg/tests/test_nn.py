"""Secure CNN inference against the plaintext fixed-point reference, model
serialization, the fixed-point codec, and exact offline budgets."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pssnn import complexity, linear as lin
from pssnn.field import Field, FieldParams
from pssnn.nn import (
    Conv2d,
    Dense,
    FixedPointCodec,
    Flatten,
    MaxPool2d,
    ModelError,
    ModelGraph,
    ReLU,
    infer_secure,
    randomness_budget,
    reveal_output,
    share_input,
    share_model,
)
from pssnn.offline import Dealer, RandomnessStore
from pssnn.oracle import plaintext_infer
from pssnn.transport import PHASE_OFFLINE, PHASE_ONLINE, run_parties

from conftest import make_cfg


def _rand_model(rng, input_shape, layers):
    """Fill conv weights in +-0.1 and dense weights in +-0.05."""
    built = []
    shape = input_shape
    graph = ModelGraph(input_shape, layers)  # validates and gives shapes
    shape = input_shape
    for li, layer in enumerate(layers):
        if layer.kind == "conv2d":
            c = shape[0]
            layer.weight = rng.uniform(-0.1, 0.1, size=(layer.out_channels, c, layer.kernel, layer.kernel))
            layer.bias = rng.uniform(-0.1, 0.1, size=layer.out_channels)
        elif layer.kind == "dense":
            layer.weight = rng.uniform(-0.05, 0.05, size=(layer.out_features, shape[0]))
            layer.bias = rng.uniform(-0.05, 0.05, size=layer.out_features)
        shape = graph.shapes[li]
        built.append(layer)
    return ModelGraph(input_shape, built)


def secure_infer(cfg, model, image, seed=0, dealer_seed=None):
    """Run full multi-party inference; returns (float logits, party-2 stats,
    per-party leftover store units if dealer mode)."""
    rng = np.random.default_rng(seed)
    in_grid = share_input(cfg, image, rng)
    model_shares = share_model(cfg, model, rng)
    stores = None
    if dealer_seed is not None:
        budget = randomness_budget(cfg, model)
        stores = [RandomnessStore(cfg) for _ in range(cfg.n)]
        Dealer(cfg, dealer_seed).fill_stores(stores, budget)

    def party(rt):
        store = stores[rt.pid - 1] if stores is not None else RandomnessStore(cfg, rt, auto=True)
        rt.set_phase(PHASE_ONLINE)
        out = infer_secure(rt, cfg, store, model, model_shares[rt.pid - 1], in_grid[rt.pid - 1])
        logits = reveal_output(rt, cfg, out)
        return logits, rt.stats

    res = run_parties(cfg.n, party, seed=seed + 1)
    for logits, _ in res[1:]:
        assert np.array_equal(logits, res[0][0])  # every party opens the same logits
    leftovers = None
    if stores is not None:
        leftovers = [
            {key: s.available(key) for key in list(s._buf)} for s in stores
        ]
    return res[0][0], res[1][1], leftovers


def _int_logits(cfg, float_logits):
    return np.rint(np.asarray(float_logits) * (1 << cfg.field.ell_x)).astype(np.int64)


# -- codec ------------------------------------------------------------------------


@settings(max_examples=100, deadline=None)
@given(x=st.floats(min_value=-1000, max_value=1000, allow_nan=False))
def test_codec_roundtrip(x):
    codec = FixedPointCodec(Field(FieldParams(31)))
    got = codec.from_field(codec.to_field(x))
    assert abs(got - x) <= 0.5 / codec.scale + 1e-12


def test_codec_int_paths():
    codec = FixedPointCodec(Field(FieldParams(31)))
    assert codec.to_int(1.0) == codec.scale
    assert codec.from_int(np.array([codec.scale, -codec.scale])).tolist() == [1.0, -1.0]


# -- model graph ------------------------------------------------------------------


def test_shape_inference():
    m = ModelGraph(
        (1, 8, 8),
        [Conv2d(4, 3, padding=1), ReLU(), MaxPool2d(2), Flatten(), Dense(10)],
    )
    assert m.shapes == [(4, 8, 8), (4, 8, 8), (4, 4, 4), (64,), (10,)]


def test_shape_errors():
    with pytest.raises(ModelError):
        ModelGraph((1, 5, 5), [MaxPool2d(2)])  # 2 does not divide 5
    with pytest.raises(ModelError):
        ModelGraph((10,), [Conv2d(2, 3)])  # conv needs (c, h, w)
    with pytest.raises(ModelError):
        ModelGraph((1, 4, 4), [Dense(3)])  # dense needs a flat input
    with pytest.raises(ModelError):
        ModelGraph((1, 4, 4), [Conv2d(2, 3, weight=np.zeros((2, 2, 3, 3)))])


def test_model_save_load_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    model = _rand_model(
        rng, (2, 6, 6), [Conv2d(3, 3, padding=1), ReLU(), MaxPool2d(2), Flatten(), Dense(5)]
    )
    path = tmp_path / "model.npz"
    model.save(path)
    loaded = ModelGraph.load(path)
    assert loaded.input_shape == model.input_shape
    assert loaded.shapes == model.shapes
    for a, b in zip(loaded.layers, model.layers):
        assert a.kind == b.kind
        if a.kind in ("conv2d", "dense"):
            assert np.array_equal(a.weight, b.weight)
            assert np.array_equal(a.bias, b.bias)


# -- end-to-end inference ------------------------------------------------------------


@pytest.mark.parametrize("n,k", [(5, 2), (7, 3)])
def test_infer_conv_relu_pool_dense(n, k):
    cfg = make_cfg(n, k)
    rng = np.random.default_rng(1)
    model = _rand_model(
        rng, (2, 6, 6), [Conv2d(3, 3, padding=1), ReLU(), MaxPool2d(2), Flatten(), Dense(5)]
    )
    # moderate input scale keeps masked-shift wraparound (probability about
    # |value| / 2^ell per element) out of this determinism-sensitive check
    image = rng.uniform(-0.2, 0.2, size=(2, 6, 6))
    logits, _, _ = secure_infer(cfg, model, image)
    want = plaintext_infer(cfg.field, model, image)
    got = _int_logits(cfg, logits)
    assert np.all(np.abs(got - want.astype(np.int64)) <= 2)


def test_infer_conv_conv_pack_trans():
    cfg = make_cfg(7, 3)
    rng = np.random.default_rng(2)
    model = _rand_model(
        rng,
        (2, 6, 6),
        [
            Conv2d(3, 3, padding=1),
            ReLU(),
            Conv2d(2, 3, padding=1),
            ReLU(),
            Flatten(),
            Dense(4),
        ],
    )
    image = rng.uniform(-0.2, 0.2, size=(2, 6, 6))
    logits, _, _ = secure_infer(cfg, model, image)
    want = plaintext_infer(cfg.field, model, image)
    got = _int_logits(cfg, logits)
    assert np.all(np.abs(got - want.astype(np.int64)) <= 3)


def test_dealer_budget_exact_and_offline_silent():
    """The analytic randomness budget provisions the dealer exactly: the run
    consumes every unit, needs no interactive offline traffic, and matches
    the reference output."""
    cfg = make_cfg(7, 3)
    rng = np.random.default_rng(3)
    model = _rand_model(
        rng,
        (1, 6, 6),
        [Conv2d(4, 3, padding=1), ReLU(), MaxPool2d(2), Flatten(), Dense(6), ReLU(), Dense(3)],
    )
    image = rng.uniform(-1, 1, size=(1, 6, 6))
    logits, stats, leftovers = secure_infer(cfg, model, image, dealer_seed=99)
    want = plaintext_infer(cfg.field, model, image)
    assert np.all(np.abs(_int_logits(cfg, logits) - want.astype(np.int64)) <= 3)
    assert stats.rounds[PHASE_OFFLINE] == 0
    for per_party in leftovers:
        assert all(v == 0 for v in per_party.values()), per_party


def test_flatten_and_bias_are_free():
    """Total online traffic of an inference equals the sum of the analytic
    per-protocol costs: flatten, bias addition, and zero padding add nothing."""
    cfg = make_cfg(5, 2)
    rng = np.random.default_rng(4)
    model = _rand_model(
        rng, (1, 4, 4), [Conv2d(2, 3, padding=1), ReLU(), Flatten(), Dense(4)]
    )
    image = rng.uniform(-1, 1, size=(1, 4, 4))
    _, stats, _ = secure_infer(cfg, model, image, dealer_seed=5)
    measured = stats.elements_sent(PHASE_ONLINE) + stats.elements_recvd(PHASE_ONLINE)
    groups, ohw = 1, 16  # conv output: 2 channels over k=2 slots, 4x4 cells
    expected = (
        complexity.predict(cfg, "pmat_mult_trunc", u=groups, m=ohw)["elements"]
        + complexity.predict(cfg, "relu", batch=groups * ohw)["elements"]
        + complexity.predict(cfg, "vec_mat_mult_trunc", u=32, v=4)["elements"]
        + complexity.predict(cfg, "open", m=lin.pad_len(4, cfg.k) // cfg.k)["elements"]
    )
    assert measured == expected


def test_budget_keys_cover_model():
    cfg = make_cfg(7, 3)
    model = ModelGraph(
        (1, 6, 6),
        [Conv2d(4, 3, padding=1), ReLU(), MaxPool2d(2), Flatten(), Dense(6)],
    )
    budget = randomness_budget(cfg, model)
    kinds = {key[0] for key in budget}
    assert kinds == {"pmatmask", "bits", "pair", "trunc"}
    assert all(v > 0 for v in budget.values())
