"""Layer primitives: same-padding 3x3 convolution, 2x2 max pooling,
inverted dropout, flatten, dense.  NHWC layout throughout.

Each layer is an object with forward(...) and backward(dy); forward
caches whatever backward needs (inputs, ReLU masks, pool argmax,
dropout masks).  Parameters are stored in float32 by default; every
reduction accumulates in float64 and the result is cast back, which
keeps training storage small without letting long sums drift.

The convolution is computed by shift-and-add over the nine kernel taps
(nine GEMMs against padded views), and its input gradient is the same
loop transposed — algebraically the full correlation with the kernel
flipped in both spatial axes and transposed in the channel axes.
"""

from __future__ import annotations

import numpy as np

_CHECK_FINITE = False


def set_debug_finite(enabled: bool) -> None:
    """Turn on NaN/Inf assertions after every layer op (slow; tests only)."""
    global _CHECK_FINITE
    _CHECK_FINITE = bool(enabled)


def _finite(name: str, arr: np.ndarray) -> np.ndarray:
    if _CHECK_FINITE and not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"non-finite values out of {name}")
    return arr


class NNError(ValueError):
    pass


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic; no output clamping."""
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int,
                   dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Conv2D:
    """3x3, stride 1, zero-padded same convolution, optional ReLU.

    Weights: (3, 3, in_channels, filters); bias: (filters,).
    """

    def __init__(self, in_channels: int, filters: int,
                 activation: str | None = "relu",
                 rng: np.random.Generator | None = None,
                 dtype=np.float32):
        if activation not in ("relu", None):
            raise NNError(f"conv activation {activation!r} not supported")
        self.in_channels = in_channels
        self.filters = filters
        self.activation = activation
        self.dtype = dtype
        k = 9 * in_channels
        if rng is None:
            rng = np.random.default_rng(0)
        self.w = glorot_uniform(rng, (3, 3, in_channels, filters),
                                fan_in=k, fan_out=9 * filters, dtype=dtype)
        self.b = np.zeros(filters, dtype=dtype)
        self._x = None
        self._mask = None

    def params(self):
        return [self.w, self.b]

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if x.ndim != 4 or x.shape[3] != self.in_channels:
            raise NNError(f"conv expects (N,H,W,{self.in_channels}), got {x.shape}")
        n, h, w_, _ = x.shape
        xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0))).astype(np.float64)
        w64 = self.w.astype(np.float64)
        z = np.zeros((n, h, w_, self.filters), dtype=np.float64)
        for di in range(3):
            for dj in range(3):
                patch = xp[:, di:di + h, dj:dj + w_, :]
                z += np.tensordot(patch, w64[di, dj], axes=([3], [0]))
        z += self.b.astype(np.float64)
        if train:
            self._x = x
        if self.activation == "relu":
            if train:
                self._mask = z > 0
            out = relu(z)
        else:
            out = z
        return _finite("conv", out.astype(self.dtype))

    def pre_activation(self, x: np.ndarray) -> np.ndarray:
        """Forward without the nonlinearity (no caching)."""
        saved = self.activation
        try:
            self.activation = None
            return self.forward(x, train=False)
        finally:
            self.activation = saved

    def backward(self, dy: np.ndarray):
        if self._x is None:
            raise NNError("conv backward before forward(train=True)")
        x = self._x
        n, h, w_, _ = x.shape
        dz = dy.astype(np.float64)
        if self.activation == "relu":
            dz = dz * self._mask
        xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0))).astype(np.float64)
        w64 = self.w.astype(np.float64)
        dw = np.zeros((3, 3, self.in_channels, self.filters), dtype=np.float64)
        dxp = np.zeros_like(xp)
        for di in range(3):
            for dj in range(3):
                patch = xp[:, di:di + h, dj:dj + w_, :]
                dw[di, dj] = np.tensordot(patch, dz, axes=([0, 1, 2], [0, 1, 2]))
                dxp[:, di:di + h, dj:dj + w_, :] += np.tensordot(
                    dz, w64[di, dj], axes=([3], [1]))
        db = dz.sum(axis=(0, 1, 2))
        dx = dxp[:, 1:h + 1, 1:w_ + 1, :]
        return (dx.astype(self.dtype),
                [dw.astype(self.dtype), db.astype(self.dtype)])


class MaxPool2D:
    """2x2, stride 2.  Ties route the gradient to the first maximum in
    window row-major order (the numpy argmax convention)."""

    def __init__(self):
        self._argmax = None
        self._in_shape = None

    def params(self):
        return []

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        n, h, w, c = x.shape
        if h % 2 or w % 2:
            raise NNError(f"maxpool needs even H,W, got {x.shape}")
        win = x.reshape(n, h // 2, 2, w // 2, 2, c)
        win = win.transpose(0, 1, 3, 2, 4, 5).reshape(n, h // 2, w // 2, 4, c)
        idx = win.argmax(axis=3)
        out = np.take_along_axis(win, idx[:, :, :, None, :], axis=3)[:, :, :, 0, :]
        if train:
            self._argmax = idx
            self._in_shape = x.shape
        return _finite("maxpool", out)

    def backward(self, dy: np.ndarray):
        if self._argmax is None:
            raise NNError("maxpool backward before forward(train=True)")
        n, h, w, c = self._in_shape
        dwin = np.zeros((n, h // 2, w // 2, 4, c), dtype=dy.dtype)
        np.put_along_axis(dwin, self._argmax[:, :, :, None, :],
                          dy[:, :, :, None, :], axis=3)
        dx = dwin.reshape(n, h // 2, w // 2, 2, 2, c)
        dx = dx.transpose(0, 1, 3, 2, 4, 5).reshape(n, h, w, c)
        return dx, []


class Dropout:
    """Inverted dropout: zero with probability rate, scale survivors by
    1/(1-rate) so expectations match between train and infer."""

    def __init__(self, rate: float = 0.2):
        if not 0.0 <= rate < 1.0:
            raise NNError(f"dropout rate {rate} outside [0, 1)")
        self.rate = rate
        self._scaled_mask = None

    def params(self):
        return []

    def forward(self, x: np.ndarray, train: bool = False,
                rng: np.random.Generator | None = None) -> np.ndarray:
        if not train:
            return x
        if rng is None:
            raise NNError("dropout in train mode needs an rng")
        keep = rng.random(x.shape) >= self.rate
        scaled = keep.astype(x.dtype) / np.asarray(1.0 - self.rate, dtype=x.dtype)
        self._scaled_mask = scaled
        return _finite("dropout", x * scaled)

    def backward(self, dy: np.ndarray):
        if self._scaled_mask is None:
            raise NNError("dropout backward before forward(train=True)")
        return dy * self._scaled_mask, []


class Flatten:
    def __init__(self):
        self._in_shape = None

    def params(self):
        return []

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if train:
            self._in_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy: np.ndarray):
        if self._in_shape is None:
            raise NNError("flatten backward before forward(train=True)")
        return dy.reshape(self._in_shape), []


class Dense:
    """Fully connected: y = act(x @ w + b); w is (in, units)."""

    def __init__(self, in_features: int, units: int,
                 activation: str | None,
                 rng: np.random.Generator | None = None,
                 dtype=np.float32):
        if activation not in ("relu", "sigmoid", None):
            raise NNError(f"dense activation {activation!r} not supported")
        self.in_features = in_features
        self.units = units
        self.activation = activation
        self.dtype = dtype
        if rng is None:
            rng = np.random.default_rng(0)
        self.w = glorot_uniform(rng, (in_features, units),
                                fan_in=in_features, fan_out=units, dtype=dtype)
        self.b = np.zeros(units, dtype=dtype)
        self._x = None
        self._mask = None
        self._y = None

    def params(self):
        return [self.w, self.b]

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise NNError(f"dense expects (N,{self.in_features}), got {x.shape}")
        z = (x.astype(np.float64) @ self.w.astype(np.float64)
             + self.b.astype(np.float64))
        if self.activation == "relu":
            out = relu(z)
            if train:
                self._mask = z > 0
        elif self.activation == "sigmoid":
            out = sigmoid(z)
            if train:
                self._y = out
        else:
            out = z
        if train:
            self._x = x
        return _finite("dense", out.astype(self.dtype))

    def backward(self, dy: np.ndarray):
        if self._x is None:
            raise NNError("dense backward before forward(train=True)")
        dz = dy.astype(np.float64)
        if self.activation == "relu":
            dz = dz * self._mask
        elif self.activation == "sigmoid":
            y = self._y
            dz = dz * y * (1.0 - y)
        x64 = self._x.astype(np.float64)
        dw = x64.T @ dz
        db = dz.sum(axis=0)
        dx = dz @ self.w.astype(np.float64).T
        return (dx.astype(self.dtype),
                [dw.astype(self.dtype), db.astype(self.dtype)])
