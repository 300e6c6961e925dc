"""Regular/irregular masks: generation, dihedral augmentation, coverage buckets.

A mask is a 2-D ``uint8`` array with 1 for missing pixels and 0 for background.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ParameterError

MASK_DTYPE = np.uint8
REPORTED_BUCKETS = ["0-10%", "10-20%", "20-30%", "30-40%", "40-50%", "50-60%"]
ALL_BUCKETS = [f"{10 * k}-{10 * (k + 1)}%" for k in range(10)]


def coverage(m) -> float:
    m = np.asarray(m)
    return float(m.mean()) if m.size else 0.0


def square_side(h: int, w: int, ratio: float) -> int:
    if not 0 < ratio <= 1:
        raise ParameterError(f"mask ratio must be in (0, 1], got {ratio}")
    side = round(math.sqrt(ratio * h * w))
    if side > min(h, w):
        raise ParameterError(f"{side}x{side} square does not fit in {h}x{w}")
    return side


def regular_mask(h: int, w: int, ratio: float = 0.25, seed: int = 0, placement: str = "random"):
    """Square hole of ``round(sqrt(ratio*h*w))`` pixels per side.

    ``placement="random"`` draws the top-left corner uniformly over positions
    where the square fits entirely; ``"center"`` gives the fixed centred square.
    """
    side = square_side(h, w, ratio)
    if placement == "center":
        top, left = (h - side) // 2, (w - side) // 2
    elif placement == "random":
        rng = np.random.default_rng(seed)
        top = int(rng.integers(0, h - side + 1))
        left = int(rng.integers(0, w - side + 1))
    else:
        raise ParameterError(f"unknown placement {placement!r}")
    m = np.zeros((h, w), dtype=MASK_DTYPE)
    m[top:top + side, left:left + side] = 1
    return m


def augment_mask(m) -> list:
    """The 8 dihedral images: rotations 0/90/180/270, then the same of the h-flip."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ParameterError(f"augment_mask needs a square mask, got shape {m.shape}")
    out = []
    for base in (m, m[:, ::-1]):
        for k in range(4):
            out.append(np.ascontiguousarray(np.rot90(base, k)))
    return out


def bucket_index(cov: float) -> int:
    if not 0 <= cov <= 1:
        raise ParameterError(f"coverage must be in [0, 1], got {cov}")
    # rounding guards 0.3 * 10 == 2.9999999999999996
    return min(int(math.floor(round(cov * 10, 9))), 9)


def coverage_class(m) -> str:
    """Bucket label such as ``"10-20%"``; buckets are half-open, 100% joins the top one."""
    if np.isscalar(m):
        k = bucket_index(float(m))
    else:
        m = np.asarray(m)
        k = min(int(10 * int(m.sum()) // m.size), 9) if m.size else 0
    return ALL_BUCKETS[k]


def load_mask(path) -> np.ndarray:
    """Read an 8-bit raster; pixels >= 128 become 1."""
    path = Path(path)
    try:
        with Image.open(path) as img:
            img.load()
            if img.mode not in ("L", "1", "P", "RGB", "RGBA", "LA"):
                raise OSError(f"{path}: unsupported mask image mode {img.mode}")
            gray = np.asarray(img.convert("L"))
    except (UnidentifiedImageError, OSError) as exc:
        raise OSError(f"cannot read mask {path}: {exc}") from exc
    return (gray >= 128).astype(MASK_DTYPE)


def save_mask(m, path) -> None:
    Image.fromarray((np.asarray(m) > 0).astype(np.uint8) * 255, mode="L").save(path)
