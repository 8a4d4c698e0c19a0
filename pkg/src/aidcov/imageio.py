"""Reading and writing grayscale images (PGM P2/P5, PNG)."""
from __future__ import annotations

from pathlib import Path

import numpy as np

__all__ = ["ImageReadError", "read_image", "write_pgm", "IMAGE_SUFFIXES"]

IMAGE_SUFFIXES = (".pgm", ".png")


class ImageReadError(OSError):
    pass


def _pgm_tokens(data: bytes, count: int, start: int) -> tuple[list[int], int]:
    tokens = []
    i = start
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < n and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
            j += 1
        if j == i:
            raise ValueError("truncated PGM header")
        tokens.append(int(data[i:j]))
        i = j
    return tokens, i


def _read_pgm(data: bytes) -> np.ndarray:
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise ValueError(f"not a PGM file (magic {magic!r})")
    (w, h, maxval), pos = _pgm_tokens(data, 3, 2)
    if w <= 0 or h <= 0 or not 0 < maxval < 65536:
        raise ValueError(f"bad PGM header {w}x{h} maxval {maxval}")
    if magic == b"P5":
        pos += 1  # single whitespace byte after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        raw = np.frombuffer(data, dtype=dtype, count=w * h, offset=pos)
    else:
        vals, _ = _pgm_tokens(data, w * h, pos)
        raw = np.asarray(vals)
    if raw.size != w * h:
        raise ValueError("truncated PGM pixel data")
    return raw.reshape(h, w).astype(np.float64) / maxval


def _read_png(path: Path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        if im.mode in ("I;16", "I;16B", "I"):
            arr = np.asarray(im, dtype=np.float64) / 65535.0
        else:
            arr = np.asarray(im.convert("L"), dtype=np.float64) / 255.0
    return arr


def read_image(path) -> np.ndarray:
    """Load a grayscale image as a float array with values in ``[0, 1]``."""
    path = Path(path)
    try:
        if path.suffix.lower() == ".png":
            return _read_png(path)
        return _read_pgm(path.read_bytes())
    except Exception as exc:  # noqa: BLE001 - any decoder failure names the file
        raise ImageReadError(f"cannot read image {path}: {exc}") from exc


def write_pgm(path, img, binary: bool = True) -> None:
    """Write a ``[0, 1]`` float image as an 8-bit PGM."""
    img = np.asarray(img, dtype=np.float64)
    q = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    h, w = q.shape
    if binary:
        Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + q.tobytes())
    else:
        rows = "\n".join(" ".join(str(v) for v in row) for row in q)
        Path(path).write_text(f"P2\n{w} {h}\n255\n{rows}\n", encoding="utf-8")
