"""Minimal PNG and PPM codecs over numpy arrays.

The writer always emits 8-bit non-interlaced images with filter type 0
on every scanline and a fixed zlib level, so identical pixel data gives
identical file bytes on every platform and run.  The reader handles the
subset needed to load anything the writer or a standard encoder would
produce for this project: bit depth 8, grayscale / RGB / RGBA, all five
scanline filters, non-interlaced.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_ZLIB_LEVEL = 6


class PngError(ValueError):
    """Malformed or unsupported PNG data."""


def _chunk(tag: bytes, payload: bytes) -> bytes:
    return (struct.pack(">I", len(payload)) + tag + payload
            + struct.pack(">I", zlib.crc32(tag + payload) & 0xFFFFFFFF))


def encode_png(img: np.ndarray) -> bytes:
    """Encode (H,W) grayscale, (H,W,3) RGB, or (H,W,4) RGBA uint8."""
    if img.dtype != np.uint8:
        raise PngError(f"expected uint8 pixels, got {img.dtype}")
    if img.ndim == 2:
        color_type, channels = 0, 1
        img = img[:, :, None]
    elif img.ndim == 3 and img.shape[2] == 3:
        color_type, channels = 2, 3
    elif img.ndim == 3 and img.shape[2] == 4:
        color_type, channels = 6, 4
    else:
        raise PngError(f"unsupported image shape {img.shape}")
    h, w = img.shape[:2]
    if h == 0 or w == 0:
        raise PngError("empty image")
    ihdr = struct.pack(">IIBBBBB", w, h, 8, color_type, 0, 0, 0)
    rows = np.ascontiguousarray(img).reshape(h, w * channels)
    raw = b"".join(b"\x00" + rows[r].tobytes() for r in range(h))
    idat = zlib.compress(raw, _ZLIB_LEVEL)
    return (_SIGNATURE + _chunk(b"IHDR", ihdr) + _chunk(b"IDAT", idat)
            + _chunk(b"IEND", b""))


def write_png(path, img: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_png(img))


def _paeth(a: int, b: int, c: int) -> int:
    p = a + b - c
    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    if pb <= pc:
        return b
    return c


def _unfilter(raw: bytes, h: int, w: int, channels: int) -> np.ndarray:
    stride = w * channels
    if len(raw) != h * (stride + 1):
        raise PngError(f"decompressed size {len(raw)} != expected {h * (stride + 1)}")
    out = np.zeros((h, stride), dtype=np.uint8)
    bpp = channels
    for r in range(h):
        ftype = raw[r * (stride + 1)]
        line = np.frombuffer(raw, dtype=np.uint8,
                             count=stride, offset=r * (stride + 1) + 1)
        if ftype == 0:
            out[r] = line
        elif ftype == 1:  # Sub
            row = line.astype(np.int32).copy()
            for i in range(bpp, stride):
                row[i] = (row[i] + row[i - bpp]) & 0xFF
            out[r] = row
        elif ftype == 2:  # Up
            prev = out[r - 1] if r > 0 else np.zeros(stride, np.uint8)
            out[r] = (line.astype(np.int32) + prev) & 0xFF
        elif ftype == 3:  # Average
            prev = out[r - 1] if r > 0 else np.zeros(stride, np.uint8)
            row = line.astype(np.int32).copy()
            for i in range(stride):
                a = row[i - bpp] if i >= bpp else 0
                row[i] = (row[i] + (a + int(prev[i])) // 2) & 0xFF
            out[r] = row
        elif ftype == 4:  # Paeth
            prev = out[r - 1] if r > 0 else np.zeros(stride, np.uint8)
            row = line.astype(np.int32).copy()
            for i in range(stride):
                a = row[i - bpp] if i >= bpp else 0
                c = int(prev[i - bpp]) if i >= bpp else 0
                row[i] = (row[i] + _paeth(a, int(prev[i]), c)) & 0xFF
            out[r] = row
        else:
            raise PngError(f"unknown filter type {ftype} on row {r}")
    return out


def decode_png(data: bytes) -> np.ndarray:
    """Decode to (H,W), (H,W,3) or (H,W,4) uint8."""
    if data[:8] != _SIGNATURE:
        raise PngError("bad signature")
    pos = 8
    ihdr = None
    idat = b""
    while pos < len(data):
        if pos + 8 > len(data):
            raise PngError("truncated chunk header")
        (length,) = struct.unpack(">I", data[pos:pos + 4])
        tag = data[pos + 4:pos + 8]
        payload = data[pos + 8:pos + 8 + length]
        if len(payload) != length:
            raise PngError(f"truncated {tag!r} chunk")
        (crc,) = struct.unpack(">I", data[pos + 8 + length:pos + 12 + length])
        if crc != (zlib.crc32(tag + payload) & 0xFFFFFFFF):
            raise PngError(f"crc mismatch in {tag!r} chunk")
        pos += 12 + length
        if tag == b"IHDR":
            ihdr = payload
        elif tag == b"IDAT":
            idat += payload
        elif tag == b"IEND":
            break
        # ancillary chunks are skipped
    if ihdr is None:
        raise PngError("missing IHDR")
    w, h, depth, color_type, comp, filt, interlace = struct.unpack(">IIBBBBB", ihdr)
    if depth != 8:
        raise PngError(f"unsupported bit depth {depth}")
    if comp != 0 or filt != 0:
        raise PngError("unsupported compression/filter method")
    if interlace != 0:
        raise PngError("interlaced PNG not supported")
    channels = {0: 1, 2: 3, 6: 4}.get(color_type)
    if channels is None:
        raise PngError(f"unsupported color type {color_type}")
    if not idat:
        raise PngError("missing IDAT")
    try:
        raw = zlib.decompress(idat)
    except zlib.error as exc:
        raise PngError(f"corrupt IDAT stream: {exc}") from exc
    flat = _unfilter(raw, h, w, channels)
    if channels == 1:
        return flat.reshape(h, w)
    return flat.reshape(h, w, channels)


def read_png(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode_png(fh.read())


# -- PPM fallback (debugging; no compression, trivially inspectable) --------

def write_ppm(path, img: np.ndarray) -> None:
    if img.dtype != np.uint8 or img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"PPM wants (H,W,3) uint8, got {img.dtype} {img.shape}")
    h, w = img.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img).tobytes())


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    fields = []
    pos = 0
    while len(fields) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    if fields[0] != b"P6":
        raise ValueError("not a P6 PPM")
    w, h, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    if maxval != 255:
        raise ValueError(f"unsupported maxval {maxval}")
    pos += 1  # single whitespace after maxval
    pixels = np.frombuffer(data, np.uint8, count=h * w * 3, offset=pos)
    return pixels.reshape(h, w, 3).copy()
