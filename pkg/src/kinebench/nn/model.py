"""The classifier network and its loss.

Stack: six [3x3 conv (ReLU) -> 2x2 max pool -> dropout 0.2] blocks with
4, 4, 8, 8, 16, 16 filters, a flatten, a 16-unit ReLU dense layer and a
1-unit sigmoid head.  On 256x256x3 input the feature map shrinks to
4x4x16 = 256 flattened features and 8,757 trainable parameters total.

Dropout randomness is derived from a key (seed, epoch, batch): each
dropout layer i draws from default_rng((seed, epoch, batch, i)), so a
training run is exactly reproducible from one master seed and any epoch
can be replayed bit-for-bit without carrying generator state around.
"""

from __future__ import annotations

import numpy as np

from .layers import Conv2D, Dense, Dropout, Flatten, MaxPool2D, NNError

INPUT_SIZE = 256
INPUT_CHANNELS = 3
CONV_FILTERS = (4, 4, 8, 8, 16, 16)
DENSE_UNITS = 16
DROPOUT_RATE = 0.2

# binary cross-entropy epsilon, added inside both logs
BCE_EPSILON = 2e-07


def bce_loss(y: np.ndarray, y_hat: np.ndarray) -> tuple[float, float]:
    """Mean binary cross-entropy with epsilon inside the logs, and
    threshold-0.5 accuracy.  Returns (loss, accuracy)."""
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    p = np.asarray(y_hat, dtype=np.float64).reshape(-1)
    if y.shape != p.shape:
        raise NNError(f"labels {y.shape} vs predictions {p.shape}")
    loss = float(np.mean(y * np.log(1.0 / (p + BCE_EPSILON))
                         + (1.0 - y) * np.log(1.0 / (1.0 - p + BCE_EPSILON))))
    acc = float(np.mean((p >= 0.5) == (y == 1.0)))
    return loss, acc


def _bce_grad(y: np.ndarray, p: np.ndarray) -> np.ndarray:
    """d(mean bce)/d y_hat, epsilon included (matches bce_loss exactly)."""
    n = y.shape[0]
    return (-(y / (p + BCE_EPSILON)) + (1.0 - y) / (1.0 - p + BCE_EPSILON)) / n


class Table1Model:
    """The fixed conv stack; input (N, 256, 256, 3), output (N,) in (0,1)."""

    def __init__(self, seed: int = 0, dtype=np.float32,
                 input_size: int = INPUT_SIZE,
                 input_channels: int = INPUT_CHANNELS,
                 conv_filters: tuple[int, ...] = CONV_FILTERS,
                 dense_units: int = DENSE_UNITS,
                 dropout_rate: float = DROPOUT_RATE):
        if input_size % (2 ** len(conv_filters)) != 0:
            raise NNError(f"input size {input_size} not divisible by "
                          f"2^{len(conv_filters)}")
        self.seed = seed
        self.dtype = dtype
        self.input_size = input_size
        self.input_channels = input_channels
        self.conv_filters = tuple(conv_filters)
        self.dropout_rate = dropout_rate
        rng = np.random.default_rng(seed)

        self.convs: list[Conv2D] = []
        self.pools: list[MaxPool2D] = []
        self.drops: list[Dropout] = []
        c_in = input_channels
        for f in conv_filters:
            self.convs.append(Conv2D(c_in, f, activation="relu", rng=rng,
                                     dtype=dtype))
            self.pools.append(MaxPool2D())
            self.drops.append(Dropout(dropout_rate))
            c_in = f
        self.flatten = Flatten()
        side = input_size // (2 ** len(conv_filters))
        flat = side * side * c_in
        self.fc1 = Dense(flat, dense_units, activation="relu", rng=rng,
                         dtype=dtype)
        self.fc2 = Dense(dense_units, 1, activation="sigmoid", rng=rng,
                         dtype=dtype)

    # -- parameters ---------------------------------------------------------

    def params(self) -> list[np.ndarray]:
        """All trainable arrays in checkpoint order: conv1.w, conv1.b, ...,
        conv6.w, conv6.b, fc1.w, fc1.b, fc2.w, fc2.b."""
        out = []
        for conv in self.convs:
            out.extend(conv.params())
        out.extend(self.fc1.params())
        out.extend(self.fc2.params())
        return out

    def set_params(self, arrays: list[np.ndarray]) -> None:
        own = self.params()
        if len(arrays) != len(own):
            raise NNError(f"expected {len(own)} arrays, got {len(arrays)}")
        holders = []
        for conv in self.convs:
            holders.append((conv, "w"))
            holders.append((conv, "b"))
        holders += [(self.fc1, "w"), (self.fc1, "b"),
                    (self.fc2, "w"), (self.fc2, "b")]
        for (obj, attr), arr in zip(holders, arrays):
            cur = getattr(obj, attr)
            if cur.shape != arr.shape:
                raise NNError(f"shape mismatch: {attr} wants {cur.shape}, "
                              f"got {arr.shape}")
            setattr(obj, attr, arr.astype(cur.dtype))

    def param_count(self) -> int:
        return sum(int(p.size) for p in self.params())

    def summary(self) -> list[tuple[str, tuple, int]]:
        """(layer kind, output shape with None batch, param count) per layer."""
        rows = []
        size = self.input_size
        for i, conv in enumerate(self.convs):
            f = self.conv_filters[i]
            rows.append(("Conv2D", (None, size, size, f),
                         int(conv.w.size + conv.b.size)))
            size //= 2
            rows.append(("MaxPooling2D", (None, size, size, f), 0))
            rows.append(("Dropout", (None, size, size, f), 0))
        flat = size * size * self.conv_filters[-1]
        rows.append(("Flatten", (None, flat), 0))
        rows.append(("Dense", (None, self.fc1.units),
                     int(self.fc1.w.size + self.fc1.b.size)))
        rows.append(("Dense", (None, self.fc2.units),
                     int(self.fc2.w.size + self.fc2.b.size)))
        return rows

    # -- forward / backward -------------------------------------------------

    def _dropout_rngs(self, dropout_key) -> list[np.random.Generator]:
        if dropout_key is None:
            raise NNError("train-mode forward needs dropout_key=(seed, epoch, batch)")
        seed, epoch, batch = (int(v) for v in dropout_key)
        return [np.random.default_rng((seed, epoch, batch, i))
                for i in range(len(self.drops))]

    def forward(self, x: np.ndarray, train: bool = False,
                dropout_key=None) -> np.ndarray:
        """Probabilities, shape (N,).  train=True caches for backward and
        applies dropout keyed by dropout_key."""
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim != 4 or x.shape[1] != self.input_size \
                or x.shape[2] != self.input_size \
                or x.shape[3] != self.input_channels:
            raise NNError(
                f"expected (N,{self.input_size},{self.input_size},"
                f"{self.input_channels}), got {x.shape}")
        rngs = self._dropout_rngs(dropout_key) if train else [None] * len(self.drops)
        h = x
        for conv, pool, drop, rng in zip(self.convs, self.pools, self.drops, rngs):
            h = conv.forward(h, train=train)
            h = pool.forward(h, train=train)
            h = drop.forward(h, train=train, rng=rng)
        h = self.flatten.forward(h, train=train)
        h = self.fc1.forward(h, train=train)
        h = self.fc2.forward(h, train=train)
        return h.reshape(-1)

    def backward(self, y: np.ndarray,
                 y_hat: np.ndarray) -> tuple[float, float, list[np.ndarray]]:
        """Gradients of mean bce w.r.t. every parameter, using the caches
        from the last train-mode forward.  Returns (loss, accuracy, grads)
        with grads aligned to params()."""
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        p = np.asarray(y_hat, dtype=np.float64).reshape(-1)
        loss, acc = bce_loss(y, p)
        dy = _bce_grad(y, p).reshape(-1, 1)

        grads_rev: list[np.ndarray] = []
        dy, g = self.fc2.backward(dy)
        grads_rev.extend(reversed(g))
        dy, g = self.fc1.backward(dy)
        grads_rev.extend(reversed(g))
        dy, _ = self.flatten.backward(dy)
        for conv, pool, drop in zip(reversed(self.convs), reversed(self.pools),
                                    reversed(self.drops)):
            dy, _ = drop.backward(dy)
            dy, _ = pool.backward(dy)
            dy, g = conv.backward(dy)
            grads_rev.extend(reversed(g))
        return loss, acc, list(reversed(grads_rev))

    def train_step_grads(self, x: np.ndarray, y: np.ndarray, dropout_key
                         ) -> tuple[float, float, list[np.ndarray]]:
        y_hat = self.forward(x, train=True, dropout_key=dropout_key)
        return self.backward(y, y_hat)

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Infer-mode probabilities (dropout off, no caches)."""
        return self.forward(x, train=False)


def build_table1_model(seed: int = 0, dtype=np.float32) -> Table1Model:
    return Table1Model(seed=seed, dtype=dtype)
