"""Bundled synthetic test images and binary PGM (P5) I/O."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .errors import InputError, ParameterError
from .metrics import ImageBuffer
from .rng import make_rng

__all__ = [
    "blocks",
    "grating",
    "spikes",
    "synthetic",
    "SYNTHETIC_IMAGES",
    "read_pgm",
    "write_pgm",
    "load_image",
]


def _grid(size):
    y, x = np.mgrid[0:size, 0:size] / size
    return y, x


def blocks(size: int = 64) -> np.ndarray:
    """Piecewise-constant rectangles and a disc on a grey background."""
    y, x = _grid(size)
    img = np.full((size, size), 0.2)
    img[(x > 0.25) & (x < 0.6) & (y > 0.2) & (y < 0.7)] += 0.5
    img[(x - 0.7) ** 2 + (y - 0.7) ** 2 < 0.02] += 0.25
    img[(x > 0.08) & (x < 0.2) & (y > 0.78) & (y < 0.92)] = 0.95
    return np.clip(img, 0.0, 1.0)


def grating(size: int = 64, cycles: float = 4.0) -> np.ndarray:
    """Sinusoidal grating with a slowly varying orientation split."""
    y, x = _grid(size)
    left = 0.5 + 0.35 * np.sin(2 * np.pi * cycles * x)
    right = 0.5 + 0.35 * np.sin(2 * np.pi * cycles * (x + y) / np.sqrt(2))
    return np.where(x < 0.5, left, right)


def spikes(size: int = 64, count: int = 40, seed: int = 0) -> np.ndarray:
    """Sparse bright points on a dark field."""
    rng = make_rng(seed)
    img = np.full((size, size), 0.05)
    idx = rng.choice(size * size, size=count, replace=False)
    img.flat[idx] = rng.uniform(0.5, 1.0, size=count)
    return img


SYNTHETIC_IMAGES = {"blocks": blocks, "grating": grating, "spikes": spikes}


def synthetic(name: str, size: int = 64) -> ImageBuffer:
    try:
        fn = SYNTHETIC_IMAGES[name]
    except KeyError:
        raise ParameterError(
            f"unknown synthetic image {name!r}; choose from {sorted(SYNTHETIC_IMAGES)}") from None
    return ImageBuffer.from_array(fn(size))


_HEADER = re.compile(rb"P5\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s+"
                     rb"(?:#[^\n]*\n\s*)*(\d+)\s")


def read_pgm(path) -> ImageBuffer:
    """Read a binary PGM, scaling by its maxval into [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    m = _HEADER.match(data)
    if m is None:
        raise InputError(f"{path}: not a binary (P5) PGM file")
    width, height, maxval = (int(g) for g in m.groups())
    if not 0 < maxval < 65536:
        raise InputError(f"{path}: invalid maxval {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    n = width * height
    if len(data) - m.end() < n * dtype.itemsize:
        raise InputError(f"{path}: truncated pixel data")
    raw = np.frombuffer(data, dtype=dtype, count=n, offset=m.end())
    return ImageBuffer(width, height, raw.astype(float) / maxval)


def write_pgm(path, img, maxval: int = 65535) -> None:
    """Write a binary PGM; values are clamped to [0, 1] and rounded."""
    if isinstance(img, ImageBuffer):
        arr = img.array
    else:
        arr = np.asarray(img, dtype=float)
    if arr.ndim != 2:
        raise InputError("write_pgm needs a 2-D image")
    if not 0 < maxval < 65536:
        raise ParameterError(f"maxval must be in 1..65535, got {maxval}")
    q = np.rint(np.clip(arr, 0.0, 1.0) * maxval)
    dtype = ">u2" if maxval > 255 else "u1"
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{maxval}\n".encode("ascii"))
        fh.write(q.astype(dtype).tobytes())


def load_image(source, size: int = 64) -> tuple[str, ImageBuffer]:
    """Resolve ``"synthetic:<name>"`` or a PGM path to ``(label, image)``."""
    source = str(source)
    if source.startswith("synthetic:"):
        name = source.split(":", 1)[1]
        return name, synthetic(name, size)
    if source in SYNTHETIC_IMAGES:
        return source, synthetic(source, size)
    p = Path(source)
    if not p.exists():
        raise InputError(f"image file {source} does not exist")
    return p.stem, read_pgm(p)
