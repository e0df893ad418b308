import numpy as np
import pytest

from kinebench.nn.layers import (Conv2D, Dense, Dropout, Flatten, MaxPool2D,
                                 NNError, glorot_uniform, relu, sigmoid)


def naive_conv(x, w, b):
    """Reference same-padding 3x3 correlation, quadruple loop."""
    n, h, ww, cin = x.shape
    f = w.shape[3]
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    out = np.zeros((n, h, ww, f))
    for bi in range(n):
        for i in range(h):
            for j in range(ww):
                patch = xp[bi, i:i + 3, j:j + 3, :]
                for k in range(f):
                    out[bi, i, j, k] = np.sum(patch * w[:, :, :, k]) + b[k]
    return out


def numeric_grad(f, arr, h=1e-6):
    g = np.zeros_like(arr, dtype=np.float64)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = arr[idx]
        arr[idx] = orig + h
        fp = f()
        arr[idx] = orig - h
        fm = f()
        arr[idx] = orig
        g[idx] = (fp - fm) / (2 * h)
    return g


def rel_err(a, b):
    denom = max(np.abs(a).max(), np.abs(b).max(), 1e-12)
    return np.abs(a - b).max() / denom


# -- scalar pieces -----------------------------------------------------------

def test_relu():
    z = np.array([-2.0, 0.0, 3.5])
    assert np.array_equal(relu(z), [0.0, 0.0, 3.5])


def test_sigmoid_values_and_stability():
    assert sigmoid(np.array([0.0]))[0] == 0.5
    big = sigmoid(np.array([1000.0, -1000.0]))
    assert np.all(np.isfinite(big))
    assert big[0] == pytest.approx(1.0)
    assert big[1] == pytest.approx(0.0, abs=1e-300)
    z = np.array([0.3, -1.7, 4.0])
    assert np.allclose(sigmoid(z), 1.0 / (1.0 + np.exp(-z)))


def test_glorot_uniform_bounds():
    rng = np.random.default_rng(0)
    w = glorot_uniform(rng, (200, 100), fan_in=200, fan_out=100, dtype=np.float64)
    limit = np.sqrt(6.0 / 300)
    assert np.abs(w).max() <= limit
    assert np.abs(w).max() > 0.9 * limit  # actually fills the range


# -- convolution -------------------------------------------------------------

def test_conv_forward_matches_naive():
    rng = np.random.default_rng(5)
    conv = Conv2D(2, 3, activation=None, rng=rng, dtype=np.float64)
    x = rng.standard_normal((2, 6, 5, 2))
    got = conv.forward(x)
    want = naive_conv(x, conv.w, conv.b)
    assert rel_err(got, want) < 1e-12


def test_conv_relu_clips_negative():
    rng = np.random.default_rng(6)
    conv = Conv2D(1, 2, activation="relu", rng=rng, dtype=np.float64)
    x = rng.standard_normal((1, 4, 4, 1))
    pre = conv.pre_activation(x)
    post = conv.forward(x)
    assert np.array_equal(post, np.maximum(pre, 0.0))
    assert pre.min() < 0  # the case is non-trivial


def test_conv_center_tap_identity():
    conv = Conv2D(1, 1, activation=None, dtype=np.float64)
    conv.w[:] = 0.0
    conv.w[1, 1, 0, 0] = 1.0
    conv.b[:] = 0.0
    x = np.random.default_rng(7).standard_normal((1, 5, 5, 1))
    assert np.allclose(conv.forward(x), x)


def test_conv_gradients_match_finite_differences():
    rng = np.random.default_rng(8)
    conv = Conv2D(2, 2, activation="relu", rng=rng, dtype=np.float64)
    x = rng.standard_normal((2, 4, 4, 2))
    proj = rng.standard_normal((2, 4, 4, 2))  # fixed projection -> scalar

    def scalar():
        return float(np.sum(conv.forward(x) * proj))

    conv.forward(x, train=True)
    dx, (dw, db) = conv.backward(proj)
    assert rel_err(dw, numeric_grad(scalar, conv.w)) < 1e-7
    assert rel_err(db, numeric_grad(scalar, conv.b)) < 1e-7
    assert rel_err(dx, numeric_grad(scalar, x)) < 1e-7


def test_conv_shape_validation():
    conv = Conv2D(3, 4)
    with pytest.raises(NNError, match="conv expects"):
        conv.forward(np.zeros((1, 8, 8, 2), dtype=np.float32))
    with pytest.raises(NNError, match="backward before"):
        Conv2D(1, 1).backward(np.zeros((1, 4, 4, 1)))


def test_conv_rejects_unknown_activation():
    with pytest.raises(NNError, match="activation"):
        Conv2D(1, 1, activation="tanh")


# -- max pooling -------------------------------------------------------------

def test_maxpool_forward():
    x = np.arange(16, dtype=np.float64).reshape(1, 4, 4, 1)
    out = MaxPool2D().forward(x)
    assert out.shape == (1, 2, 2, 1)
    assert np.array_equal(out[0, :, :, 0], [[5, 7], [13, 15]])


def test_maxpool_tie_routes_to_first():
    pool = MaxPool2D()
    x = np.ones((1, 2, 2, 1), dtype=np.float64)
    pool.forward(x, train=True)
    dx, _ = pool.backward(np.full((1, 1, 1, 1), 2.0))
    assert dx[0, 0, 0, 0] == 2.0
    assert dx.sum() == 2.0  # only the first position in the window


def test_maxpool_backward_scatters_to_argmax():
    rng = np.random.default_rng(9)
    pool = MaxPool2D()
    x = rng.standard_normal((2, 4, 6, 3))
    out = pool.forward(x, train=True)
    dy = rng.standard_normal(out.shape)
    dx, _ = pool.backward(dy)
    # each window's gradient mass lands on its maximum
    for n in range(2):
        for i in range(2):
            for j in range(3):
                for c in range(3):
                    win = x[n, 2 * i:2 * i + 2, 2 * j:2 * j + 2, c]
                    gwin = dx[n, 2 * i:2 * i + 2, 2 * j:2 * j + 2, c]
                    flat = win.reshape(-1)
                    gflat = gwin.reshape(-1)
                    k = int(flat.argmax())
                    assert gflat[k] == dy[n, i, j, c]
                    assert np.count_nonzero(gflat) <= 1


def test_maxpool_odd_size_rejected():
    with pytest.raises(NNError, match="even"):
        MaxPool2D().forward(np.zeros((1, 5, 4, 1)))


# -- dropout -----------------------------------------------------------------

def test_dropout_infer_is_identity():
    x = np.random.default_rng(10).standard_normal((3, 4))
    drop = Dropout(0.2)
    assert drop.forward(x, train=False) is x


def test_dropout_train_requires_rng():
    with pytest.raises(NNError, match="rng"):
        Dropout(0.2).forward(np.ones((2, 2)), train=True)


def test_dropout_preserves_expectation():
    rng = np.random.default_rng(11)
    x = np.ones((200, 200))
    out = Dropout(0.2).forward(x, train=True, rng=rng)
    kept = out != 0.0
    assert abs(kept.mean() - 0.8) < 0.01
    assert np.allclose(out[kept], 1.0 / 0.8)
    assert abs(out.mean() - 1.0) < 0.02


def test_dropout_backward_reuses_mask():
    rng = np.random.default_rng(12)
    drop = Dropout(0.5)
    x = np.ones((50, 50))
    out = drop.forward(x, train=True, rng=rng)
    dx, _ = drop.backward(np.ones_like(x))
    assert np.array_equal(dx, out)  # same scaled mask applied to ones


def test_dropout_rate_validation():
    with pytest.raises(NNError):
        Dropout(1.0)
    with pytest.raises(NNError):
        Dropout(-0.1)


# -- flatten and dense -------------------------------------------------------

def test_flatten_round_trip():
    rng = np.random.default_rng(13)
    x = rng.standard_normal((3, 4, 5, 2))
    fl = Flatten()
    flat = fl.forward(x, train=True)
    assert flat.shape == (3, 40)
    back, _ = fl.backward(flat)
    assert np.array_equal(back, x)


def test_dense_forward_is_affine():
    rng = np.random.default_rng(14)
    dense = Dense(5, 3, activation=None, rng=rng, dtype=np.float64)
    x = rng.standard_normal((4, 5))
    assert np.allclose(dense.forward(x), x @ dense.w + dense.b)


def test_dense_gradients_match_finite_differences():
    for act in ("relu", "sigmoid", None):
        rng = np.random.default_rng(15)
        dense = Dense(4, 3, activation=act, rng=rng, dtype=np.float64)
        x = rng.standard_normal((5, 4))
        proj = rng.standard_normal((5, 3))

        def scalar():
            return float(np.sum(dense.forward(x) * proj))

        dense.forward(x, train=True)
        dx, (dw, db) = dense.backward(proj)
        assert rel_err(dw, numeric_grad(scalar, dense.w)) < 1e-7, act
        assert rel_err(db, numeric_grad(scalar, dense.b)) < 1e-7, act
        assert rel_err(dx, numeric_grad(scalar, x)) < 1e-7, act


def test_dense_shape_validation():
    dense = Dense(4, 2, activation=None)
    with pytest.raises(NNError, match="dense expects"):
        dense.forward(np.zeros((3, 5), dtype=np.float32))
