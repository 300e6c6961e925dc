"""Grayscale conversion, Canny edges and mask compositing.

Edge maps are 2-D ``float32`` arrays ``(h, w)`` with values in [0, 1];
Canny output is binary. Masks are 2-D arrays with 1 marking missing pixels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ParameterError, ShapeError
from .tensor_core import DTYPE, as_tensor

LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class CannyParams:
    sigma: float = 2.0
    low_ratio: float = 0.1
    high_ratio: float = 0.2

    def __post_init__(self):
        if self.sigma < 0:
            raise ParameterError(f"sigma must be >= 0, got {self.sigma}")
        if not 0 < self.low_ratio < self.high_ratio < 1:
            raise ParameterError(
                f"need 0 < low_ratio < high_ratio < 1, got {self.low_ratio}, {self.high_ratio}"
            )


def is_binary(a) -> bool:
    a = np.asarray(a)
    return bool(np.all((a == 0) | (a == 1)))


def to_grayscale(rgb) -> np.ndarray:
    """BT.601 luma of an ``(n, 3, h, w)`` tensor, returned as ``(n, 1, h, w)``."""
    rgb = as_tensor(rgb, "rgb")
    if rgb.shape[1] != 3:
        raise ShapeError(f"to_grayscale expects 3 channels, got {rgb.shape[1]}")
    y = np.tensordot(LUMA, rgb.astype(np.float64), axes=([0], [1]))
    return y[:, None].astype(DTYPE)


def gaussian_kernel1d(sigma: float) -> np.ndarray:
    radius = math.ceil(3 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-(x * x) / (2 * sigma * sigma))
    return g / g.sum()


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur of a 2-D image with reflect boundaries."""
    if sigma == 0:
        return img.astype(np.float64)
    g = gaussian_kernel1d(sigma)
    r = len(g) // 2
    padded = np.pad(img.astype(np.float64), r, mode="reflect")
    rows = sum(g[k] * padded[:, k:k + img.shape[1]] for k in range(len(g)))
    return sum(g[k] * rows[k:k + img.shape[0], :] for k in range(len(g)))


def sobel(img: np.ndarray):
    p = np.pad(img, 1, mode="reflect")
    h, w = img.shape

    def at(dr, dc):
        return p[1 + dr:1 + dr + h, 1 + dc:1 + dc + w]

    gx = (at(-1, 1) + 2 * at(0, 1) + at(1, 1)) - (at(-1, -1) + 2 * at(0, -1) + at(1, -1))
    gy = (at(1, -1) + 2 * at(1, 0) + at(1, 1)) - (at(-1, -1) + 2 * at(-1, 0) + at(-1, 1))
    return gx, gy


# neighbour offset (row, col) along the gradient for each quantized direction
_DIRECTIONS = {0: (0, 1), 45: (1, 1), 90: (1, 0), 135: (1, -1)}


def quantize_direction(gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    angle = np.degrees(np.arctan2(gy, gx)) % 180.0
    q = np.zeros(angle.shape, dtype=np.int16)
    q[(angle >= 22.5) & (angle < 67.5)] = 45
    q[(angle >= 67.5) & (angle < 112.5)] = 90
    q[(angle >= 112.5) & (angle < 157.5)] = 135
    return q


def non_max_suppression(mag: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """Boolean map of pixels that are ridge maxima along their gradient.

    Ties go to the pixel on the negative side (>= backward, > forward), so a
    two-pixel plateau thins to one pixel.
    """
    h, w = mag.shape
    p = np.pad(mag, 1)
    keep = np.zeros(mag.shape, dtype=bool)
    for q, (dr, dc) in _DIRECTIONS.items():
        sel = direction == q
        fwd = p[1 + dr:1 + dr + h, 1 + dc:1 + dc + w]
        bwd = p[1 - dr:1 - dr + h, 1 - dc:1 - dc + w]
        keep |= sel & (mag > fwd) & (mag >= bwd)
    return keep & (mag > 0)


def hysteresis(candidates: np.ndarray, mag: np.ndarray, low: float, high: float) -> np.ndarray:
    weak = candidates & (mag >= low)
    strong = weak & (mag >= high)
    labels, count = ndimage.label(weak, structure=np.ones((3, 3), dtype=bool))
    if count == 0:
        return np.zeros(mag.shape, dtype=bool)
    has_strong = np.zeros(count + 1, dtype=bool)
    has_strong[labels[strong]] = True
    has_strong[0] = False
    return has_strong[labels]


def _as_image2d(gray) -> np.ndarray:
    g = np.asarray(gray)
    if g.ndim == 4:
        if g.shape[0] != 1 or g.shape[1] != 1:
            raise ShapeError(f"canny expects a single 1-channel image, got shape {g.shape}")
        g = g[0, 0]
    if g.ndim != 2:
        raise ShapeError(f"canny expects (h, w) or (1, 1, h, w), got shape {g.shape}")
    return g


def canny(gray, params: CannyParams = CannyParams()) -> np.ndarray:
    """Binary Canny edge map of a grayscale image in [0, 1].

    ``sigma == 0`` skips smoothing. Thresholds are fractions of the maximum
    gradient magnitude, so a constant image gives an empty map.
    """
    img = _as_image2d(gray)
    blurred = gaussian_blur(img, params.sigma)
    gx, gy = sobel(blurred)
    mag = np.hypot(gx, gy)
    peak = mag.max() if mag.size else 0.0
    if peak <= 0:
        return np.zeros(img.shape, dtype=DTYPE)
    thin = non_max_suppression(mag, quantize_direction(gx, gy))
    edges = hysteresis(thin, mag, params.low_ratio * peak, params.high_ratio * peak)
    return edges.astype(DTYPE)


def _mask2d(m, spatial) -> np.ndarray:
    m = np.asarray(m)
    if m.ndim == 4 and m.shape[:2] == (1, 1):
        m = m[0, 0]
    if m.shape != tuple(spatial):
        raise ShapeError(f"mask shape {m.shape} does not match spatial dims {tuple(spatial)}")
    return m.astype(DTYPE)


def mask_out(x, m) -> np.ndarray:
    """``x * (1 - m)``; ``x`` is an edge map ``(h, w)`` or a tensor ``(n, c, h, w)``."""
    x = np.asarray(x, dtype=DTYPE)
    if x.ndim not in (2, 4):
        raise ShapeError(f"mask_out expects (h, w) or (n, c, h, w), got shape {x.shape}")
    m = _mask2d(m, x.shape[-2:])
    return (x * (1 - m)).astype(DTYPE)


def composite_edges(c_gt, c_pred, m) -> np.ndarray:
    """Ground-truth edges outside the mask, predicted edges inside it."""
    c_gt = np.asarray(c_gt, dtype=DTYPE)
    c_pred = np.asarray(c_pred, dtype=DTYPE)
    if c_gt.shape != c_pred.shape or c_gt.ndim != 2:
        raise ShapeError(f"edge maps must be equal 2-D shapes, got {c_gt.shape} and {c_pred.shape}")
    m = _mask2d(m, c_gt.shape)
    return (c_gt * (1 - m) + c_pred * m).astype(DTYPE)


def composite_image(i_gt, i_pred, m) -> np.ndarray:
    i_gt = as_tensor(i_gt, "i_gt")
    i_pred = as_tensor(i_pred, "i_pred")
    if i_gt.shape != i_pred.shape:
        raise ShapeError(f"image shapes differ: {i_gt.shape} vs {i_pred.shape}")
    if i_gt.shape[1] != 3:
        raise ShapeError(f"composite_image expects 3 channels, got {i_gt.shape[1]}")
    m = _mask2d(m, i_gt.shape[2:])
    return (i_gt * (1 - m) + i_pred * m).astype(DTYPE)
