"""PNG <-> [0, 1] float tensors."""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .tensor_core import DTYPE


def load_image(path) -> np.ndarray:
    """Read an 8-bit RGB or grayscale image as a ``(1, 3, h, w)`` tensor in [0, 1]."""
    path = Path(path)
    try:
        with Image.open(path) as img:
            img.load()
            rgb = np.asarray(img.convert("RGB"), dtype=np.float64)
    except (UnidentifiedImageError, OSError) as exc:
        raise OSError(f"cannot read image {path}: {exc}") from exc
    return (rgb / 255.0).transpose(2, 0, 1)[None].astype(DTYPE)


def to_uint8(x) -> np.ndarray:
    return np.clip(np.rint(np.asarray(x, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def save_image(x, path) -> None:
    """Write a 2-D map, a ``(c, h, w)`` or a ``(1, c, h, w)`` array with c in {1, 3}."""
    a = np.asarray(x)
    if a.ndim == 4:
        a = a[0]
    if a.ndim == 3:
        a = a[0] if a.shape[0] == 1 else a.transpose(1, 2, 0)
    mode = "L" if a.ndim == 2 else "RGB"
    Image.fromarray(to_uint8(a), mode=mode).save(path)
