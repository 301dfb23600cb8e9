"""PNG read/write for tiles. All corpus and run artifacts are 8-bit RGB PNG."""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image

from .tiles import validate_tile


def decode_png(data: bytes) -> np.ndarray:
    """Decode PNG bytes to an RGB uint8 array, stripping any alpha channel."""
    img = Image.open(io.BytesIO(data))
    return np.asarray(img.convert("RGB"))


def encode_png(tile: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(tile), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def read_tile(path: str | Path, size: int | None = None) -> np.ndarray:
    with open(path, "rb") as fh:
        return validate_tile(decode_png(fh.read()), size)


def write_tile(path: str | Path, tile: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(encode_png(validate_tile(tile)))
