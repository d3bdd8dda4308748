"""Forward-value checks for the tensor engine against independent
oracles: explicit loops, numpy references, and hand-computed cases."""

import numpy as np
import pytest

from physretinex import engine as E
from physretinex.errors import ConfigurationError, ContractError, DimensionError


def test_matmul_matches_triple_loop():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((4, 6))
    b = rng.standard_normal((6, 3))
    out = E.matmul(E.constant(a), E.constant(b)).data
    ref = np.zeros((4, 3))
    for i in range(4):
        for j in range(3):
            for k in range(6):
                ref[i, j] += a[i, k] * b[k, j]
    assert np.allclose(out, ref, rtol=0, atol=1e-12)


def test_matmul_rejects_non_2d_and_mismatch():
    with pytest.raises(DimensionError):
        E.matmul(E.constant(np.zeros((2, 3, 4))), E.constant(np.zeros((4, 2))))
    with pytest.raises(DimensionError):
        E.matmul(E.constant(np.zeros((2, 3))), E.constant(np.zeros((4, 2))))


def _conv_loop(x, w, b, stride, padding, groups):
    c_in, h, wid = x.shape
    c_out, c_in_g, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (padding, padding), (padding, padding)))
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (wid + 2 * padding - kw) // stride + 1
    out = np.zeros((c_out, oh, ow))
    out_per_group = c_out // groups
    for o in range(c_out):
        g = o // out_per_group
        for y in range(oh):
            for z in range(ow):
                acc = 0.0 if b is None else b[o]
                for i in range(c_in_g):
                    for u in range(kh):
                        for v in range(kw):
                            acc += (
                                w[o, i, u, v]
                                * xp[g * c_in_g + i, y * stride + u, z * stride + v]
                            )
                out[o, y, z] = acc
    return out


@pytest.mark.parametrize(
    "c_in,c_out,k,stride,padding,groups",
    [(3, 4, 3, 1, 1, 1), (4, 6, 3, 2, 1, 2), (4, 4, 3, 1, 1, 4), (2, 5, 1, 1, 0, 1)],
)
def test_conv2d_matches_sliding_window(c_in, c_out, k, stride, padding, groups):
    rng = np.random.default_rng(1)
    x = rng.standard_normal((c_in, 7, 6))
    w = rng.standard_normal((c_out, c_in // groups, k, k))
    b = rng.standard_normal(c_out)
    out = E.conv2d(
        E.constant(x), E.constant(w), E.constant(b), stride=stride, padding=padding, groups=groups
    ).data
    ref = _conv_loop(x, w, b, stride, padding, groups)
    assert out.shape == ref.shape
    assert np.allclose(out, ref, rtol=0, atol=1e-11)


def test_conv2d_rejects_bad_groups_and_shapes():
    x = E.constant(np.zeros((3, 5, 5)))
    with pytest.raises(ConfigurationError):
        E.conv2d(x, E.constant(np.zeros((4, 3, 3, 3))), groups=2)
    with pytest.raises(DimensionError):
        E.conv2d(x, E.constant(np.zeros((4, 2, 3, 3))))
    with pytest.raises(DimensionError):
        E.conv2d(x, E.constant(np.zeros((4, 3, 9, 9))))


def test_softmax_matches_exp_normalize_and_shift_invariance():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((5, 4))
    out = E.softmax(E.constant(x), axis=1).data
    ref = np.exp(x) / np.exp(x).sum(axis=1, keepdims=True)
    assert np.allclose(out, ref, rtol=0, atol=1e-12)
    assert np.allclose(out.sum(axis=1), 1.0, atol=1e-12)
    shifted = E.softmax(E.constant(x + 123.0), axis=1).data
    assert np.allclose(out, shifted, atol=1e-12)


def test_reductions_match_loops():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((3, 4))
    assert abs(E.rsum(E.constant(x)).item() - sum(v for v in x.flat)) < 1e-12
    assert abs(E.rmean(E.constant(x)).item() - sum(v for v in x.flat) / 12) < 1e-12
    assert abs(E.rmin(E.constant(x)).item() - min(v for v in x.flat)) < 1e-12
    col_min = E.rmin(E.constant(x), axis=0).data
    assert np.allclose(col_min, [min(x[:, j]) for j in range(4)], atol=1e-15)
    keep = E.rsum(E.constant(x), axis=1, keepdims=True)
    assert keep.data.shape == (3, 1)


def test_percentile_matches_numpy_linear_interpolation():
    rng = np.random.default_rng(4)
    x = rng.standard_normal(17)
    t = E.constant(x)
    for q in (0.0, 2.0, 33.3, 50.0, 98.0, 100.0):
        assert abs(E.percentile(t, q).item() - np.percentile(x, q)) < 1e-12
    with pytest.raises(ConfigurationError):
        E.percentile(t, 101.0)


def test_avg_pool2_ceil_semantics_on_odd_extent():
    x = np.arange(9, dtype=np.float64).reshape(1, 3, 3)
    out = E.avg_pool2(E.constant(x)).data
    # 3x3 pools to 2x2; edge cells average only what they cover.
    expect = np.array([[[(0 + 1 + 3 + 4) / 4, (2 + 5) / 2], [(6 + 7) / 2, 8.0]]])
    assert np.allclose(out, expect, atol=1e-15)
    even = E.avg_pool2(E.constant(np.arange(16, dtype=np.float64).reshape(1, 4, 4))).data
    assert even.shape == (1, 2, 2)
    assert abs(even[0, 0, 0] - (0 + 1 + 4 + 5) / 4) < 1e-15


def test_bilinear_resize_hand_case_and_identity():
    x = np.array([[[1.0, 3.0]]])
    out = E.bilinear_resize(E.constant(x), (1, 4)).data
    # Half-pixel centers: src positions -0.25, 0.25, 0.75, 1.25 (clamped).
    expect = np.array([[[1.0, 0.75 * 1 + 0.25 * 3, 0.25 * 1 + 0.75 * 3, 3.0]]])
    assert np.allclose(out, expect, atol=1e-15)
    y = np.random.default_rng(5).standard_normal((2, 5, 7))
    same = E.bilinear_resize(E.constant(y), (5, 7)).data
    assert np.allclose(same, y, atol=1e-12)


def test_elementwise_values_match_numpy():
    rng = np.random.default_rng(6)
    x = rng.standard_normal((3, 3))
    t = E.constant(x)
    assert np.allclose(E.exp(t).data, np.exp(x))
    assert np.allclose(E.tanh(t).data, np.tanh(x))
    assert np.allclose(E.sigmoid(t).data, 1 / (1 + np.exp(-x)))
    assert np.allclose(E.relu(t).data, np.maximum(x, 0))
    assert np.allclose(E.absolute(t).data, np.abs(x))
    assert np.allclose(E.clip(t, -0.5, 0.5).data, np.clip(x, -0.5, 0.5))
    assert np.allclose(E.sin(t).data, np.sin(x))
    assert np.allclose(E.cos(t).data, np.cos(x))
    pos = np.abs(x) + 0.1
    assert np.allclose(E.log(E.constant(pos)).data, np.log(pos))
    assert np.allclose(E.sqrt(E.constant(pos)).data, np.sqrt(pos))
    assert np.allclose(E.pow_const(E.constant(pos), 1.7).data, pos**1.7)
    y = rng.standard_normal((3, 3))
    assert np.allclose(E.atan2(t, E.constant(y)).data, np.arctan2(x, y))


def test_clamp_magnitude_floor_and_sign():
    x = np.array([-2.0, -0.01, 0.0, 0.01, 2.0])
    out = E.clamp_magnitude(E.constant(x), 0.1).data
    assert np.allclose(out, [-2.0, -0.1, 0.1, 0.1, 2.0], atol=1e-15)


def test_broadcasting_and_sum_back():
    a = E.Tensor(np.ones((3, 1)), requires_grad=True)
    b = E.Tensor(np.ones((1, 4)), requires_grad=True)
    out = E.mul(a, b)
    assert out.data.shape == (3, 4)
    E.backward(E.rsum(out))
    assert a.grad.shape == (3, 1) and np.allclose(a.grad, 4.0)
    assert b.grad.shape == (1, 4) and np.allclose(b.grad, 3.0)
    with pytest.raises(DimensionError):
        E.add(E.constant(np.zeros((3, 4))), E.constant(np.zeros((2, 4))))


def test_shape_ops_round_trip():
    rng = np.random.default_rng(7)
    x = rng.standard_normal((2, 3, 4))
    t = E.constant(x)
    assert np.array_equal(E.reshape(t, (6, 4)).data, x.reshape(6, 4))
    assert np.array_equal(E.transpose(t, (2, 0, 1)).data, x.transpose(2, 0, 1))
    parts = [E.narrow(t, 1, i, 1) for i in range(3)]
    back = E.concat(parts, axis=1)
    assert np.array_equal(back.data, x)
    with pytest.raises(DimensionError):
        E.narrow(t, 1, 2, 5)
    with pytest.raises(DimensionError):
        E.concat([t, E.constant(np.zeros((2, 3, 5)))], axis=0)


def test_linear_scan_matches_sequential_recurrence():
    rng = np.random.default_rng(8)
    a = rng.uniform(0.1, 0.9, size=5)
    b = rng.standard_normal((5, 9))
    out = E.linear_scan(E.constant(a), E.constant(b)).data
    ref = np.zeros_like(b)
    for c in range(5):
        h = 0.0
        for t in range(9):
            h = a[c] * h + b[c, t]
            ref[c, t] = h
    assert np.allclose(out, ref, atol=1e-12)


def test_item_and_backward_contracts():
    t = E.Tensor(np.zeros((2, 2)), requires_grad=True)
    with pytest.raises(ContractError):
        t.item()
    with pytest.raises(ContractError):
        E.backward(E.add(t, 1.0))
    with pytest.raises(ContractError):
        E.backward(E.rsum(E.constant(np.ones(3))))


def test_no_grad_suppresses_graph():
    t = E.Tensor(np.ones(3), requires_grad=True)
    with E.no_grad():
        out = E.rsum(E.mul(t, t))
    assert not out.requires_grad
    out2 = E.rsum(E.mul(t, t))
    assert out2.requires_grad
