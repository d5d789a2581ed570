"""Binary portable pixmap IO: P6 (RGB) and P5 (grayscale), 8-bit.

Writers emit a canonical header ("P6\\n{W} {H}\\n255\\n"), so equal arrays
produce byte-identical files.  The reader tolerates arbitrary whitespace
and '#' comments in the header, per the format family's grammar.
"""

from __future__ import annotations

import numpy as np


class PpmError(Exception):
    """Malformed or unsupported pixmap file."""


def write_ppm(path, rgb: np.ndarray) -> None:
    """Write an HxWx3 uint8 array as binary P6."""
    arr = np.asarray(rgb)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise PpmError(f"P6 needs an HxWx3 array, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        raise PpmError(f"P6 writer needs uint8 data, got {arr.dtype}")
    h, w, _ = arr.shape
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(arr.tobytes(order="C"))


def write_pgm(path, gray: np.ndarray) -> None:
    """Write an HxW uint8 array as binary P5."""
    arr = np.asarray(gray)
    if arr.ndim != 2:
        raise PpmError(f"P5 needs an HxW array, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        raise PpmError(f"P5 writer needs uint8 data, got {arr.dtype}")
    h, w = arr.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(arr.tobytes(order="C"))


def _read_header_tokens(f, n: int) -> list[int]:
    """Read n whitespace-separated integer tokens, skipping # comments."""
    tokens: list[int] = []
    while len(tokens) < n:
        ch = f.read(1)
        if not ch:
            raise PpmError("truncated header")
        if ch in b" \t\r\n":
            continue
        if ch == b"#":
            while ch not in (b"\n", b""):
                ch = f.read(1)
            continue
        tok = ch
        while True:
            ch = f.read(1)
            if not ch or ch in b" \t\r\n":
                break
            tok += ch
        try:
            tokens.append(int(tok))
        except ValueError as e:
            raise PpmError(f"bad header token {tok!r}") from e
    return tokens


def _read_pnm(path, magic: bytes, channels: int) -> np.ndarray:
    with open(path, "rb") as f:
        if f.read(2) != magic:
            raise PpmError(f"{path}: not a {magic.decode()} file")
        w, h, maxval = _read_header_tokens(f, 3)
        if maxval != 255:
            raise PpmError(f"{path}: only 8-bit pixmaps supported, maxval={maxval}")
        raw = f.read(w * h * channels)
        if len(raw) != w * h * channels:
            raise PpmError(f"{path}: truncated pixel data")
    arr = np.frombuffer(raw, dtype=np.uint8)
    return arr.reshape((h, w, channels) if channels > 1 else (h, w)).copy()


def read_ppm(path) -> np.ndarray:
    """Read binary P6 into an HxWx3 uint8 array."""
    return _read_pnm(path, b"P6", 3)


def read_pgm(path) -> np.ndarray:
    """Read binary P5 into an HxW uint8 array."""
    return _read_pnm(path, b"P5", 1)
