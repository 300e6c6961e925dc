"""Adversarial, feature-matching, perceptual, style and masked l1 losses.

Activation stacks are sequences of ``(layer, tensor)`` pairs such as the
``CapturedActivation`` lists returned by ``networks.forward(..., capture=True)``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputWarning, ParameterError, ShapeError
from .tensor_core import gram_matrix

LOG_EPS = 1e-7


@dataclass(frozen=True)
class LossWeights:
    adv1: float = 1.0
    fm: float = 10.0
    l1: float = 1.0
    adv2: float = 0.1
    perc: float = 0.1
    style: float = 250.0

    def __post_init__(self):
        for name, value in vars(self).items():
            if value < 0:
                raise ParameterError(f"loss weight {name} must be >= 0, got {value}")


def _clamped(d) -> np.ndarray:
    return np.clip(np.asarray(d, dtype=np.float64), LOG_EPS, 1 - LOG_EPS)


def adversarial_d(d_real, d_fake) -> float:
    """Discriminator loss ``-(E[log D(real)] + E[log(1 - D(fake))])``."""
    return float(-(np.mean(np.log(_clamped(d_real))) + np.mean(np.log(1 - _clamped(d_fake)))))


def adversarial_g(d_fake) -> float:
    """Non-saturating generator loss ``-E[log D(fake)]``."""
    return float(-np.mean(np.log(_clamped(d_fake))))


def _tensor(entry) -> np.ndarray:
    return np.asarray(entry[1] if isinstance(entry, tuple) else entry, dtype=np.float64)


def _layer_name(entry, i: int) -> str:
    return str(entry[0]) if isinstance(entry, tuple) else str(i)


def _aligned(a, b):
    if len(a) != len(b):
        raise ShapeError(f"activation stacks have {len(a)} and {len(b)} layers")
    for i, (ea, eb) in enumerate(zip(a, b)):
        ta, tb = _tensor(ea), _tensor(eb)
        if ta.shape != tb.shape:
            raise ShapeError(f"layer {_layer_name(ea, i)}: shapes {ta.shape} and {tb.shape} differ")
        yield ta, tb


def feature_matching(real_acts, fake_acts) -> float:
    """Sum over layers of the element-count-normalized l1 distance."""
    return float(sum(np.abs(ta - tb).sum() / ta.size for ta, tb in _aligned(real_acts, fake_acts)))


def perceptual(gt_acts, pred_acts) -> float:
    """Same functional form as :func:`feature_matching`, over extractor activations."""
    return feature_matching(gt_acts, pred_acts)


def style(gt_feats, pred_feats) -> float:
    """Mean over layers of the l1 norm of the Gram-matrix difference.

    Per layer the l1 norm is summed over the ``c x c`` entries and averaged
    over the batch.
    """
    terms = []
    for ta, tb in _aligned(gt_feats, pred_feats):
        diff = gram_matrix(tb, np.float64) - gram_matrix(ta, np.float64)
        terms.append(np.abs(diff).sum(axis=(1, 2)).mean())
    if not terms:
        raise ShapeError("style loss needs at least one layer")
    return float(np.mean(terms))


def l1_masked(pred, gt, m) -> float:
    """``|pred - gt|_1`` divided by (mask pixel count x channels).

    An empty mask returns 0 and emits a :class:`DegenerateInputWarning`.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ShapeError(f"pred {pred.shape} and gt {gt.shape} differ")
    m = np.asarray(m)
    if m.shape != pred.shape[-2:]:
        raise ShapeError(f"mask {m.shape} does not match spatial dims {pred.shape[-2:]}")
    count = float(np.count_nonzero(m))
    if count == 0:
        warnings.warn("l1_masked: empty mask, returning 0", DegenerateInputWarning)
        return 0.0
    channels = pred.shape[1] if pred.ndim == 4 else 1
    batch = pred.shape[0] if pred.ndim == 4 else 1
    return float(np.abs(pred - gt).sum() / (count * channels * batch))


def joint_g1(adv: float, fm: float, weights: LossWeights = LossWeights()) -> float:
    return weights.adv1 * adv + weights.fm * fm


def joint_g2(l1: float, adv: float, perc: float, style_: float,
             weights: LossWeights = LossWeights()) -> float:
    return weights.l1 * l1 + weights.adv2 * adv + weights.perc * perc + weights.style * style_
