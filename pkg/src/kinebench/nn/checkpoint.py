"""Binary checkpoint format for model weights and optimizer state.

Weights file ("KNCK"):
    magic   4 bytes  b"KNCK"
    version u32 LE   (currently 1)
    epoch   u32 LE   training epoch the weights belong to (0 = fresh)
    count   u32 LE   number of arrays
    table   count * [kind u8, ndim u8, dim u32 LE * ndim]
    payload little-endian float32, arrays concatenated in table order

kind is 0 for conv kernels (stored [kh][kw][in][out]), 1 for biases,
2 for dense kernels (stored [in][out]).  Loading is all-or-nothing: any
magic/version/shape/length problem raises before any array is returned.

Optimizer sidecar ("KOPT") holds the Adam step count followed by the
first-moment then second-moment arrays under the same table format, so
a resumed run continues bit-for-bit.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .adam import AdamState, init_adam
from .layers import NNError
from .model import Table1Model

_MAGIC = b"KNCK"
_OPT_MAGIC = b"KOPT"
_VERSION = 1


class CheckpointError(ValueError):
    pass


def _kind_of(arr: np.ndarray) -> int:
    if arr.ndim == 4:
        return 0
    if arr.ndim == 1:
        return 1
    if arr.ndim == 2:
        return 2
    raise CheckpointError(f"array rank {arr.ndim} has no checkpoint kind")


def _pack(magic: bytes, head_u32: list[int], arrays: list[np.ndarray]) -> bytes:
    parts = [magic, struct.pack("<I", _VERSION)]
    parts += [struct.pack("<I", v) for v in head_u32]
    parts.append(struct.pack("<I", len(arrays)))
    for arr in arrays:
        parts.append(struct.pack("<BB", _kind_of(arr), arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
    for arr in arrays:
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return b"".join(parts)


def _unpack(data: bytes, magic: bytes, n_head: int,
            what: str) -> tuple[list[int], list[np.ndarray]]:
    if data[:4] != magic:
        raise CheckpointError(f"not a {what} file (bad magic {data[:4]!r})")
    pos = 4

    def _u32() -> int:
        nonlocal pos
        if pos + 4 > len(data):
            raise CheckpointError(f"truncated {what} header")
        (v,) = struct.unpack_from("<I", data, pos)
        pos += 4
        return v

    version = _u32()
    if version != _VERSION:
        raise CheckpointError(f"unsupported {what} version {version}")
    head = [_u32() for _ in range(n_head)]
    count = _u32()
    shapes = []
    for _ in range(count):
        if pos + 2 > len(data):
            raise CheckpointError(f"truncated {what} table")
        kind, ndim = struct.unpack_from("<BB", data, pos)
        pos += 2
        if pos + 4 * ndim > len(data):
            raise CheckpointError(f"truncated {what} table")
        dims = struct.unpack_from(f"<{ndim}I", data, pos)
        pos += 4 * ndim
        expect = {0: 4, 1: 1, 2: 2}.get(kind)
        if expect is None or expect != ndim:
            raise CheckpointError(f"bad table entry kind={kind} ndim={ndim}")
        shapes.append(dims)
    total = sum(int(np.prod(s)) for s in shapes)
    if len(data) - pos != 4 * total:
        raise CheckpointError(
            f"payload length {len(data) - pos} != expected {4 * total}")
    arrays = []
    for s in shapes:
        n = int(np.prod(s))
        arr = np.frombuffer(data, dtype="<f4", count=n, offset=pos)
        pos += 4 * n
        arrays.append(arr.reshape(s).copy())
    return head, arrays


def save_checkpoint(model: Table1Model, path, epoch: int = 0) -> None:
    Path(path).write_bytes(_pack(_MAGIC, [int(epoch)], model.params()))


def load_checkpoint(path, model: Table1Model | None = None
                    ) -> tuple[Table1Model, int]:
    """Load weights; into `model` if given, else into a fresh default
    build.  Shapes must match the model's layer table exactly."""
    head, arrays = _unpack(Path(path).read_bytes(), _MAGIC, 1, "checkpoint")
    epoch = head[0]
    if model is None:
        model = Table1Model()
    try:
        model.set_params(arrays)
    except NNError as exc:
        raise CheckpointError(str(exc)) from exc
    return model, epoch


def save_optimizer(state: AdamState, path) -> None:
    Path(path).write_bytes(_pack(_OPT_MAGIC, [int(state.t)],
                                 state.m + state.v))


def load_optimizer(path, params: list[np.ndarray],
                   lr: float | None = None) -> AdamState:
    """Rebuild Adam state for `params`; moment shapes must match."""
    head, arrays = _unpack(Path(path).read_bytes(), _OPT_MAGIC, 1, "optimizer")
    if len(arrays) != 2 * len(params):
        raise CheckpointError(f"optimizer holds {len(arrays)} arrays, "
                              f"model wants {2 * len(params)}")
    state = init_adam(params) if lr is None else init_adam(params, lr=lr)
    state.t = head[0]
    half = len(params)
    for i, p in enumerate(params):
        if arrays[i].shape != p.shape or arrays[half + i].shape != p.shape:
            raise CheckpointError(f"moment shape mismatch at array {i}")
        state.m[i] = arrays[i].astype(p.dtype)
        state.v[i] = arrays[half + i].astype(p.dtype)
    return state
