import io
import struct
import zlib

import numpy as np
import pytest
from PIL import Image

from kinebench.png_io import (PngError, decode_png, encode_png, read_png,
                              read_ppm, write_png, write_ppm)


def random_image(rng, channels):
    shape = (37, 61) if channels == 1 else (37, 61, channels)
    return rng.integers(0, 256, size=shape, dtype=np.uint8)


@pytest.mark.parametrize("channels", [1, 3, 4])
def test_round_trip(channels, tmp_path):
    rng = np.random.default_rng(7 + channels)
    img = random_image(rng, channels)
    path = tmp_path / "img.png"
    write_png(path, img)
    back = read_png(path)
    assert np.array_equal(back, img)


def test_encode_is_deterministic():
    rng = np.random.default_rng(3)
    img = random_image(rng, 3)
    assert encode_png(img) == encode_png(img)


@pytest.mark.parametrize("channels", [1, 3, 4])
def test_pillow_reads_our_pngs(channels):
    rng = np.random.default_rng(11 + channels)
    img = random_image(rng, channels)
    loaded = np.asarray(Image.open(io.BytesIO(encode_png(img))))
    if channels == 1:
        assert np.array_equal(loaded, img)
    else:
        assert np.array_equal(loaded, img)


@pytest.mark.parametrize("mode", ["L", "RGB", "RGBA"])
def test_we_read_pillow_pngs_all_filter_choices(mode):
    """Pillow picks per-row filters adaptively at high compression, which
    exercises the Sub/Up/Average/Paeth unfilter paths."""
    rng = np.random.default_rng(13)
    channels = {"L": 1, "RGB": 3, "RGBA": 4}[mode]
    base = random_image(rng, channels)
    # smooth gradients push the encoder toward non-zero filters
    ramp = np.add.outer(np.arange(37), np.arange(61)) % 256
    img = ((base.astype(int) + (ramp[..., None] if channels > 1 else ramp))
           % 256).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(img, mode=mode).save(buf, format="PNG", optimize=True)
    assert np.array_equal(decode_png(buf.getvalue()), img)


def test_rejects_bad_signature():
    with pytest.raises(PngError, match="signature"):
        decode_png(b"NOTAPNG" + b"\x00" * 100)


def test_rejects_corrupt_crc():
    data = bytearray(encode_png(np.zeros((4, 4, 3), dtype=np.uint8)))
    data[40] ^= 0xFF  # somewhere inside IHDR/IDAT payload
    with pytest.raises(PngError):
        decode_png(bytes(data))


def test_rejects_truncation():
    data = encode_png(np.zeros((16, 16, 3), dtype=np.uint8))
    with pytest.raises(PngError):
        decode_png(data[:len(data) // 2])


def test_rejects_unsupported_depth():
    # hand-roll a 16-bit grayscale IHDR
    ihdr = struct.pack(">IIBBBBB", 4, 4, 16, 0, 0, 0, 0)
    chunk = b"IHDR" + ihdr
    data = (b"\x89PNG\r\n\x1a\n"
            + struct.pack(">I", len(ihdr)) + chunk
            + struct.pack(">I", zlib.crc32(chunk) & 0xFFFFFFFF))
    with pytest.raises(PngError, match="depth|bit"):
        decode_png(data)


def test_rejects_non_uint8_input():
    with pytest.raises(PngError):
        encode_png(np.zeros((4, 4, 3), dtype=np.float32))


def test_ppm_round_trip(tmp_path):
    rng = np.random.default_rng(23)
    img = random_image(rng, 3)
    path = tmp_path / "img.ppm"
    write_ppm(path, img)
    assert np.array_equal(read_ppm(path), img)
