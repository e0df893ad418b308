import numpy as np
import pytest

from kinebench.nn import (CheckpointError, Table1Model, adam_step,
                          build_table1_model, init_adam, load_checkpoint,
                          load_optimizer, save_checkpoint, save_optimizer)


def small():
    return Table1Model(seed=3, input_size=8, input_channels=2,
                       conv_filters=(2, 3), dense_units=4)


def test_weights_round_trip_exact(tmp_path):
    model = small()
    save_checkpoint(model, tmp_path / "w.knck", epoch=17)
    loaded, epoch = load_checkpoint(tmp_path / "w.knck", model=small())
    assert epoch == 17
    for a, b in zip(model.params(), loaded.params()):
        assert a.dtype == b.dtype == np.float32
        assert np.array_equal(a, b)


def test_load_into_fresh_default_model(tmp_path):
    model = build_table1_model(seed=5)
    save_checkpoint(model, tmp_path / "w.knck")
    loaded, epoch = load_checkpoint(tmp_path / "w.knck")
    assert epoch == 0
    assert all(np.array_equal(a, b)
               for a, b in zip(model.params(), loaded.params()))


def test_shape_mismatch_rejected(tmp_path):
    save_checkpoint(small(), tmp_path / "w.knck")
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "w.knck", model=build_table1_model())


def test_bad_magic_rejected(tmp_path):
    save_checkpoint(small(), tmp_path / "w.knck")
    data = bytearray((tmp_path / "w.knck").read_bytes())
    data[:4] = b"XXXX"
    (tmp_path / "bad.knck").write_bytes(bytes(data))
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "bad.knck")


def test_truncated_file_rejected(tmp_path):
    save_checkpoint(small(), tmp_path / "w.knck")
    data = (tmp_path / "w.knck").read_bytes()
    (tmp_path / "cut.knck").write_bytes(data[:len(data) - 9])
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "cut.knck")


def test_trailing_garbage_rejected(tmp_path):
    save_checkpoint(small(), tmp_path / "w.knck")
    data = (tmp_path / "w.knck").read_bytes() + b"\x00\x00"
    (tmp_path / "fat.knck").write_bytes(data)
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "fat.knck")


def test_optimizer_round_trip(tmp_path):
    model = small()
    params = model.params()
    state = init_adam(params)
    rng = np.random.default_rng(0)
    for _ in range(3):
        adam_step(state, params, [rng.standard_normal(p.shape) for p in params])
    save_optimizer(state, tmp_path / "s.opt")
    back = load_optimizer(tmp_path / "s.opt", params)
    assert back.t == 3
    for a, b in zip(state.m + state.v, back.m + back.v):
        assert np.array_equal(a.astype(np.float32), b)


def test_optimizer_arity_mismatch(tmp_path):
    model = small()
    save_optimizer(init_adam(model.params()), tmp_path / "s.opt")
    with pytest.raises(CheckpointError, match="arrays"):
        load_optimizer(tmp_path / "s.opt", model.params()[:-2])
