"""Binary PGM (P5, maxval 255) grayscale images as float arrays in [0, 1]."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import BadHeader, BadMagic


def _header_tokens(data: bytes, count: int, pos: int):
    tokens = []
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise BadHeader("truncated PGM header")
        tokens.append(data[start:pos])
    return tokens, pos


def decode_pgm(data: bytes) -> np.ndarray:
    if data[:2] != b"P5":
        raise BadMagic(f"expected P5 magic, got {data[:2]!r}")
    try:
        (w, h, maxval), pos = _header_tokens(data, 3, 2)
        W, H, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise BadHeader("non-numeric PGM header field") from None
    if W < 1 or H < 1:
        raise BadHeader(f"invalid size {W}x{H}")
    if maxval != 255:
        raise BadHeader(f"only maxval 255 is supported, got {maxval}")
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise BadHeader("missing whitespace after maxval")
    raster = data[pos + 1 :]
    if len(raster) < W * H:
        raise BadHeader(f"expected {W * H} raster bytes, got {len(raster)}")
    pixels = np.frombuffer(raster[: W * H], dtype=np.uint8).reshape(H, W)
    return pixels.astype(np.float64) / 255.0


def encode_pgm(image) -> bytes:
    """Clamp to [0, 1], quantize to 8 bits and emit ``P5\\n<W> <H>\\n255\\n`` plus raster."""
    img = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    if img.ndim != 2:
        raise ValueError(f"expected an H x W image, got shape {img.shape}")
    H, W = img.shape
    pixels = np.rint(img * 255.0).astype(np.uint8)
    return f"P5\n{W} {H}\n255\n".encode("ascii") + pixels.tobytes()


def read_pgm(path) -> np.ndarray:
    return decode_pgm(Path(path).read_bytes())


def write_pgm(path, image) -> None:
    Path(path).write_bytes(encode_pgm(image))
