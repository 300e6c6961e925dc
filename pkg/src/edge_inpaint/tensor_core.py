"""Dense NCHW tensor primitives on top of numpy.

A "tensor" here is a C-contiguous ``float32`` ndarray of shape
``(n, c, h, w)``. Every function allocates a fresh output.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateInputWarning, ParameterError, ShapeError

DTYPE = np.float32


def as_tensor(x, name: str = "input") -> np.ndarray:
    arr = np.ascontiguousarray(x, dtype=DTYPE)
    if arr.ndim != 4:
        raise ShapeError(f"{name}: expected rank-4 (n, c, h, w), got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class ConvParams:
    """Kernel, bias and geometry of one convolution.

    ``kernel`` has shape ``(out_c, in_c, kh, kw)``. For the transposed
    convolution the same kernel is used as the adjoint, so its input has
    ``out_c`` channels and its output ``in_c`` channels (bias length ``in_c``).
    """

    kernel: np.ndarray
    bias: Optional[np.ndarray] = None
    stride: int = 1
    dilation: int = 1
    padding: int = 0
    padding_mode: str = "zero"

    def __post_init__(self):
        if self.kernel.ndim != 4:
            raise ShapeError(f"kernel must be rank 4, got shape {self.kernel.shape}")
        if self.stride < 1 or self.dilation < 1 or self.padding < 0:
            raise ParameterError(
                f"bad geometry stride={self.stride} dilation={self.dilation} padding={self.padding}"
            )
        if self.padding_mode not in ("zero", "reflect"):
            raise ParameterError(f"unknown padding_mode {self.padding_mode!r}")

    @property
    def out_c(self) -> int:
        return self.kernel.shape[0]

    @property
    def in_c(self) -> int:
        return self.kernel.shape[1]


def conv_output_size(size: int, k: int, stride: int, pad: int, dilation: int) -> int:
    return (size + 2 * pad - dilation * (k - 1) - 1) // stride + 1


def _pad(x: np.ndarray, pad: int, mode: str) -> np.ndarray:
    if pad == 0:
        return x
    widths = ((0, 0), (0, 0), (pad, pad), (pad, pad))
    if mode == "reflect":
        if pad >= min(x.shape[2], x.shape[3]):
            raise ParameterError(
                f"reflect padding {pad} needs spatial dims > {pad}, got {x.shape[2:]}"
            )
        return np.pad(x, widths, mode="reflect")
    return np.pad(x, widths)


def conv2d(x, params: ConvParams) -> np.ndarray:
    """Cross-correlation with stride, dilation and zero/reflect padding.

    Accumulates one ``(out_c, in_c) @ (in_c, positions)`` matmul per kernel
    tap, which keeps memory at the size of the output rather than an
    im2col buffer.
    """
    x = as_tensor(x)
    n, c, h, w = x.shape
    w_ = params.kernel.astype(DTYPE, copy=False)
    oc, ic, kh, kw = w_.shape
    if c != ic:
        raise ShapeError(f"conv2d: input has {c} channels on axis c, kernel expects {ic}")
    s, d, p = params.stride, params.dilation, params.padding
    ho = conv_output_size(h, kh, s, p, d)
    wo = conv_output_size(w, kw, s, p, d)
    if ho < 1:
        raise ShapeError(f"conv2d: output size {ho} on axis h for input height {h}")
    if wo < 1:
        raise ShapeError(f"conv2d: output size {wo} on axis w for input width {w}")
    xp = _pad(x, p, params.padding_mode)
    # per-tap (out_c, in_c) matrices must be contiguous for numpy to hit BLAS
    taps = np.ascontiguousarray(w_.transpose(2, 3, 0, 1))

    out = np.zeros((oc, n * ho * wo), dtype=DTYPE)
    for i in range(kh):
        for j in range(kw):
            r0, c0 = i * d, j * d
            patch = xp[:, :, r0:r0 + s * (ho - 1) + 1:s, c0:c0 + s * (wo - 1) + 1:s]
            out += taps[i, j] @ patch.transpose(1, 0, 2, 3).reshape(c, n * ho * wo)
    out = np.ascontiguousarray(out.reshape(oc, n, ho, wo).transpose(1, 0, 2, 3))
    if params.bias is not None:
        out += np.asarray(params.bias, dtype=DTYPE).reshape(1, oc, 1, 1)
    return out


def conv_transpose2d(y, params: ConvParams, output_size=None) -> np.ndarray:
    """Adjoint of :func:`conv2d` for the same kernel, stride and padding.

    Output size per axis is ``(in - 1) * stride - 2 * pad + dilation * (k - 1) + 1``
    unless ``output_size=(h, w)`` names the original conv2d input size. The
    sizes differ when striding leaves trailing input rows unread; only the
    explicit size gives the exact adjoint then.
    """
    if params.padding_mode != "zero":
        raise ParameterError("conv_transpose2d supports zero padding only")
    y = as_tensor(y)
    n, oc, hy, wy = y.shape
    w_ = params.kernel.astype(DTYPE, copy=False)
    koc, ic, kh, kw = w_.shape
    if oc != koc:
        raise ShapeError(f"conv_transpose2d: input has {oc} channels on axis c, kernel expects {koc}")
    s, d, p = params.stride, params.dilation, params.padding
    hp = (hy - 1) * s + d * (kh - 1) + 1
    wp = (wy - 1) * s + d * (kw - 1) + 1
    if output_size is None:
        ho, wo = hp - 2 * p, wp - 2 * p
    else:
        ho, wo = (int(v) for v in output_size)
        for axis, size, k, got in (("h", ho, kh, hy), ("w", wo, kw, wy)):
            if size < 1 or conv_output_size(size, k, s, p, d) != got:
                raise ShapeError(f"conv_transpose2d: output_size {size} on axis {axis} "
                                 f"does not convolve back to {got}")
    if ho < 1:
        raise ShapeError(f"conv_transpose2d: output size {ho} on axis h")
    if wo < 1:
        raise ShapeError(f"conv_transpose2d: output size {wo} on axis w")

    taps_t = np.ascontiguousarray(w_.transpose(2, 3, 1, 0))
    buf = np.zeros((ic, n, max(hp, ho + 2 * p), max(wp, wo + 2 * p)), dtype=DTYPE)
    y_cols = y.transpose(1, 0, 2, 3).reshape(oc, n * hy * wy)
    for i in range(kh):
        for j in range(kw):
            r0, c0 = i * d, j * d
            contrib = (taps_t[i, j] @ y_cols).reshape(ic, n, hy, wy)
            buf[:, :, r0:r0 + s * (hy - 1) + 1:s, c0:c0 + s * (wy - 1) + 1:s] += contrib
    buf = buf.transpose(1, 0, 2, 3)
    out = np.ascontiguousarray(buf[:, :, p:p + ho, p:p + wo])
    if params.bias is not None:
        out += np.asarray(params.bias, dtype=DTYPE).reshape(1, ic, 1, 1)
    return out


def instance_norm(x, gamma, beta, eps: float = 1e-5) -> np.ndarray:
    """Per-sample, per-channel standardization with population variance."""
    x = as_tensor(x)
    c = x.shape[1]
    gamma = np.asarray(gamma, dtype=np.float64).reshape(-1)
    beta = np.asarray(beta, dtype=np.float64).reshape(-1)
    if gamma.shape[0] != c or beta.shape[0] != c:
        raise ShapeError(f"instance_norm: gamma/beta length must equal channels ({c})")
    if eps <= 0:
        raise ParameterError("instance_norm: eps must be positive")
    x64 = x.astype(np.float64)
    mean = x64.mean(axis=(2, 3), keepdims=True)
    centered = x64 - mean
    var = np.mean(centered * centered, axis=(2, 3), keepdims=True)
    out = centered / np.sqrt(var + eps)
    out = out * gamma.reshape(1, c, 1, 1) + beta.reshape(1, c, 1, 1)
    return out.astype(DTYPE)


@dataclass(frozen=True)
class Activation:
    kind: str
    slope: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("relu", "leaky_relu", "sigmoid", "scaled_tanh"):
            raise ParameterError(f"unknown activation {self.kind!r}")
        if (self.kind == "leaky_relu") != (self.slope is not None):
            raise ParameterError("slope is required for leaky_relu and only for it")


RELU = Activation("relu")
SIGMOID = Activation("sigmoid")
SCALED_TANH = Activation("scaled_tanh")


def leaky_relu(slope: float) -> Activation:
    return Activation("leaky_relu", slope)


def apply_activation(x, kind: Activation) -> np.ndarray:
    x = np.asarray(x, dtype=DTYPE)
    if kind.kind == "relu":
        return np.maximum(x, 0).astype(DTYPE)
    if kind.kind == "leaky_relu":
        return np.where(x >= 0, x, x * DTYPE(kind.slope)).astype(DTYPE)
    if kind.kind == "sigmoid":
        # split by sign so exp never overflows
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        return out
    return ((np.tanh(x) + 1) / 2).astype(DTYPE)


@dataclass
class SpectralState:
    """Power-iteration state for one weight: left singular vector estimate ``u`` (float32)."""

    u: np.ndarray
    iterations_per_step: int = 1
    sigma: float = float("nan")
    degenerate: bool = False

    @classmethod
    def init(cls, out_c: int, rng: np.random.Generator, iterations_per_step: int = 1):
        u = rng.standard_normal(out_c)
        u = (u / np.linalg.norm(u)).astype(DTYPE)
        return cls(u=u, iterations_per_step=iterations_per_step)


def _normalize(v: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    return v / max(np.linalg.norm(v), eps)


def spectral_normalize(weight, state: SpectralState):
    """Divide ``weight`` by its power-iteration estimate of the top singular value.

    The weight is viewed as an ``out_c x (everything else)`` matrix. Returns
    ``(normalized_weight, new_state)``; the input state is not modified.
    """
    weight = np.asarray(weight, dtype=DTYPE)
    mat = weight.reshape(weight.shape[0], -1).astype(np.float64)
    if state.u.shape != (mat.shape[0],):
        raise ShapeError(f"spectral state u has length {state.u.shape[0]}, weight has {mat.shape[0]} rows")
    if not np.any(mat):
        warnings.warn("spectral_normalize: zero weight matrix left unchanged", DegenerateInputWarning)
        return weight.copy(), SpectralState(state.u.copy(), state.iterations_per_step, 0.0, True)
    u = state.u.astype(np.float64)
    for _ in range(max(1, state.iterations_per_step)):
        v = _normalize(mat.T @ u)
        u = _normalize(mat @ v)
    sigma = float(u @ mat @ v)
    # u is kept float32 so archived states reproduce forward passes exactly
    new_state = SpectralState(u.astype(DTYPE), state.iterations_per_step, sigma, False)
    return (weight / DTYPE(sigma)).astype(DTYPE), new_state


def gram_matrix(features, dtype=DTYPE) -> np.ndarray:
    """Per-sample ``F F^T / (c h w)`` of the ``c x (h w)`` unfolding; shape ``(n, c, c)``."""
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 4:
        raise ShapeError(f"features: expected rank-4 (n, c, h, w), got shape {f.shape}")
    n, c, h, w = f.shape
    flat = f.reshape(n, c, h * w)
    g = np.matmul(flat, flat.transpose(0, 2, 1)) / (c * h * w)
    # exact symmetry regardless of BLAS summation order
    g = (g + g.transpose(0, 2, 1)) / 2
    return g.astype(dtype)


def bilinear_resize(x, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear interpolation with half-pixel centers, edge-clamped."""
    x = as_tensor(x)
    if out_h < 1 or out_w < 1:
        raise ParameterError(f"target size must be positive, got {out_h}x{out_w}")
    n, c, h, w = x.shape
    if (h, w) == (out_h, out_w):
        return x.copy()

    def axis(src: int, dst: int):
        pos = (np.arange(dst, dtype=np.float64) + 0.5) * (src / dst) - 0.5
        pos = np.clip(pos, 0, src - 1)
        lo = np.floor(pos).astype(np.int64)
        hi = np.minimum(lo + 1, src - 1)
        return lo, hi, pos - lo

    y0, y1, fy = axis(h, out_h)
    x0, x1, fx = axis(w, out_w)
    x64 = x.astype(np.float64)
    top = x64[:, :, y0, :]
    bot = x64[:, :, y1, :]
    rows = top + (bot - top) * fy[None, None, :, None]
    left = rows[:, :, :, x0]
    right = rows[:, :, :, x1]
    return (left + (right - left) * fx).astype(DTYPE)


def center_crop(x, ch: int, cw: int) -> np.ndarray:
    x = as_tensor(x)
    h, w = x.shape[2:]
    top, left = (h - ch) // 2, (w - cw) // 2
    return np.ascontiguousarray(x[:, :, top:top + ch, left:left + cw])


def is_finite(x) -> bool:
    return bool(np.all(np.isfinite(x)))


__all__ = [
    "DTYPE", "as_tensor", "ConvParams", "conv2d", "conv_transpose2d", "instance_norm",
    "Activation", "RELU", "SIGMOID", "SCALED_TANH", "leaky_relu", "apply_activation",
    "SpectralState", "spectral_normalize", "gram_matrix", "bilinear_resize",
    "center_crop", "conv_output_size", "is_finite",
]
