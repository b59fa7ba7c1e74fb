import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dtakit import autograd as ag
from dtakit.fusion import (DimensionMismatch, fuse, fuse_ablation,
                           predict_affinity)
from dtakit.gradcheck import op_gradcheck
from dtakit.model import ModelConfig, init_params


def fusion_params(width=8, seed=0, dtype=np.float64):
    rng = np.random.default_rng(seed)
    params = {}
    for block in (1, 2):
        for lin in (1, 2):
            params[f"fusion.block{block}.lin{lin}.w"] = ag.Tensor(
                rng.standard_normal((width, width)).astype(dtype))
            params[f"fusion.block{block}.lin{lin}.b"] = ag.Tensor(
                rng.standard_normal(width).astype(dtype) * 0.1)
    return params


def _loop_fusion_oracle(e_d, e_t, params):
    """Hand-stepped recomputation with per-channel loops."""
    def gate(vec, block):
        w1 = params[f"fusion.block{block}.lin1.w"].data
        b1 = params[f"fusion.block{block}.lin1.b"].data
        w2 = params[f"fusion.block{block}.lin2.w"].data
        b2 = params[f"fusion.block{block}.lin2.b"].data
        inner = [sum(w1[r][c] * vec[c] for c in range(len(vec))) + b1[r]
                 for r in range(len(vec))]
        outer = [sum(w2[r][c] * inner[c] for c in range(len(vec))) + b2[r]
                 for r in range(len(vec))]
        return [1.0 / (1.0 + np.exp(-x)) for x in outer]

    total = [d + t for d, t in zip(e_d, e_t)]
    w1 = gate(total, 1)
    e1 = [w * d + (1 - w) * t for w, d, t in zip(w1, e_d, e_t)]
    w2 = gate(e1, 2)
    e2 = [w * d + (1 - w) * t for w, d, t in zip(w2, e_d, e_t)]
    w3 = [1.0 / (1.0 + np.exp(-x)) for x in e2]
    out = [w * x + (1 - w) * s for w, x, s in zip(w3, e2, total)]
    return np.asarray(e1), np.asarray(e2), np.asarray(out)


# ------------------------------------------------------------------- fuse

def test_equal_embeddings_pass_through():
    params = fusion_params()
    v = np.random.default_rng(1).standard_normal((6, 8))
    out = fuse(ag.Tensor(v), ag.Tensor(v.copy()), params)
    # e1 = e2 = v exactly, so the output is v against v + v through w3.
    e1 = _loop_fusion_oracle(v[0], v[0], params)[0]
    assert np.allclose(e1, v[0], atol=1e-12)


def test_zero_e2_gives_half_gates():
    params = fusion_params()
    width = 8
    zero = np.zeros((1, width))
    # Force e2 = 0 by fusing zero with zero through zeroed gate params.
    for k in params:
        params[k] = ag.Tensor(np.zeros_like(params[k].data))
    out = fuse(ag.Tensor(zero), ag.Tensor(zero), params)
    assert np.allclose(out.data, 0.0)
    # Analytic statement: sigmoid(0) = 0.5 makes out = 0.5*(e_d + e_t) when
    # e2 == 0; verified with nonzero inputs whose gates cancel.
    e_d = np.array([[1.0, -2.0, 0.5, 3.0, -1.0, 0.25, -0.75, 2.0]])
    e_t = -e_d  # then e_d + e_t = 0, w1 = sigmoid(b) etc., e2 = mix
    out2 = fuse(ag.Tensor(e_d), ag.Tensor(e_t), params)
    # With all-zero gate params: w1 = 0.5 -> e1 = 0; w2 = 0.5 -> e2 = 0;
    # w3 = 0.5 -> out = 0.5*e2 + 0.5*(e_d + e_t) = 0.
    assert np.allclose(out2.data, 0.0)


def test_fuse_matches_loop_oracle():
    params = fusion_params(width=4, seed=3)
    rng = np.random.default_rng(4)
    e_d = rng.standard_normal((5, 4))
    e_t = rng.standard_normal((5, 4))
    out = fuse(ag.Tensor(e_d), ag.Tensor(e_t), params)
    for row in range(5):
        _, _, expected = _loop_fusion_oracle(e_d[row], e_t[row], params)
        assert np.abs(out.data[row] - expected).max() <= 1e-6


def test_dimension_mismatch():
    params = fusion_params()
    with pytest.raises(DimensionMismatch):
        fuse(ag.Tensor(np.zeros((2, 8))), ag.Tensor(np.zeros((2, 4))), params)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_first_fusion_is_convex_combination(seed):
    rng = np.random.default_rng(seed)
    params = fusion_params(width=6, seed=seed)
    e_d = rng.standard_normal(6)
    e_t = rng.standard_normal(6)
    e1, e2, _ = _loop_fusion_oracle(e_d, e_t, params)
    lo = np.minimum(e_d, e_t) - 1e-12
    hi = np.maximum(e_d, e_t) + 1e-12
    assert np.all(e1 >= lo) and np.all(e1 <= hi)
    assert np.all(e2 >= lo) and np.all(e2 <= hi)


def test_output_is_convex_mix_of_e2_and_sum(rng):
    params = fusion_params(width=6, seed=8)
    e_d = rng.standard_normal(6)
    e_t = rng.standard_normal(6)
    _, e2, out = _loop_fusion_oracle(e_d, e_t, params)
    total = e_d + e_t
    lo = np.minimum(e2, total) - 1e-12
    hi = np.maximum(e2, total) + 1e-12
    assert np.all(out >= lo) and np.all(out <= hi)


def test_fusion_is_asymmetric(rng):
    params = fusion_params(width=8, seed=5)
    e_d = rng.standard_normal((3, 8))
    e_t = rng.standard_normal((3, 8))
    a = fuse(ag.Tensor(e_d), ag.Tensor(e_t), params)
    b = fuse(ag.Tensor(e_t), ag.Tensor(e_d), params)
    assert np.abs(a.data - b.data).max() > 1e-3


# ---------------------------------------------------------------- ablations

def test_add_mode_identity_on_zero():
    e_d = np.random.default_rng(0).standard_normal((2, 8))
    out = fuse_ablation(ag.Tensor(e_d), ag.Tensor(np.zeros((2, 8))), "add")
    assert np.array_equal(out.data, e_d)


def test_concat_mode_dims():
    out = fuse_ablation(ag.Tensor(np.zeros((2, 128))),
                        ag.Tensor(np.ones((2, 128))), "concat")
    assert out.data.shape == (2, 256)


def test_attention_mode_delegates_bitwise(rng):
    params = fusion_params()
    e_d, e_t = rng.standard_normal((2, 8)), rng.standard_normal((2, 8))
    direct = fuse(ag.Tensor(e_d), ag.Tensor(e_t), params)
    routed = fuse_ablation(ag.Tensor(e_d), ag.Tensor(e_t), "attention", params)
    assert np.array_equal(direct.data, routed.data)


def test_unknown_mode_rejected():
    with pytest.raises(ValueError):
        fuse_ablation(ag.Tensor(np.zeros((1, 4))),
                      ag.Tensor(np.zeros((1, 4))), "mean")


# --------------------------------------------------------------------- head

def head_setup(dtype="float64"):
    cfg = ModelConfig.toy(dtype=dtype, dropout=0.0)
    params, state = init_params(cfg, seed=6)
    wrapped = {k: ag.Tensor(v) for k, v in params.items()}
    wrapped.update(state)
    return cfg, wrapped


def test_identical_rows_identical_predictions():
    cfg, params = head_setup()
    row = np.random.default_rng(7).standard_normal(cfg.fused_width)
    batch = np.stack([row, row, row])
    out = predict_affinity(ag.Tensor(batch), params, cfg, train_mode=False)
    assert out.data.shape == (3,)
    assert np.all(out.data == out.data[0])


def test_zero_final_layer_predicts_bias():
    cfg, params = head_setup()
    last = len(cfg.head_widths) + 1
    params[f"head.fc{last}.w"] = ag.Tensor(
        np.zeros_like(params[f"head.fc{last}.w"].data))
    params[f"head.fc{last}.b"] = ag.Tensor(np.array([2.5]))
    x = np.random.default_rng(8).standard_normal((4, cfg.fused_width))
    out = predict_affinity(ag.Tensor(x), params, cfg, train_mode=False)
    assert np.allclose(out.data, 2.5)


def test_head_gradient_wrt_input_matches_fd():
    cfg, params = head_setup()
    x = np.random.default_rng(9).standard_normal((3, cfg.fused_width))

    def fn(xt):
        return predict_affinity(xt, params, cfg, train_mode=False)

    assert op_gradcheck(fn, [x]) <= 1e-4


def test_fusion_plus_head_gradcheck():
    cfg = ModelConfig.toy(dtype="float64", dropout=0.0)
    params, state = init_params(cfg, seed=10)
    rng = np.random.default_rng(11)
    for name, arr in params.items():
        if name.endswith(".b"):
            arr += rng.uniform(-0.05, 0.05, size=arr.shape)
    e_d = rng.standard_normal((2, cfg.d_o))
    e_t = rng.standard_normal((2, cfg.d_o))
    names = [n for n in params if n.startswith(("fusion.", "head."))]
    arrays = [params[n] for n in names]

    def fn(*tensors):
        local = dict(zip(names, tensors))
        local.update(state)
        fused = fuse(ag.Tensor(e_d), ag.Tensor(e_t), local)
        return predict_affinity(fused, local, cfg, train_mode=False)

    assert op_gradcheck(fn, arrays) <= 1e-4
