"""Image quality metrics, edge precision/recall, FID and per-bucket reports."""
from __future__ import annotations

import csv
import io
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage

from .edge_ops import is_binary
from .errors import DegenerateInputError, DegenerateInputWarning, ParameterError, ShapeError
from .mask_engine import ALL_BUCKETS
from .networks import build_feature_extractor, forward

PSNR_CAP = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
METRIC_FIELDS = ("rel_l1", "ssim", "psnr", "precision", "recall")
CSV_HEADER = ("id", "bucket") + METRIC_FIELDS
AGG_PREFIX = "#agg"


def _pair(pred, gt):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ShapeError(f"pred {pred.shape} and gt {gt.shape} differ")
    return pred, gt


def relative_l1(pred, gt) -> float:
    """``|pred - gt|_1 / |gt|_1`` (a fraction; multiply by 100 for percent)."""
    pred, gt = _pair(pred, gt)
    denom = np.abs(gt).sum()
    if denom == 0:
        raise DegenerateInputError("relative_l1: ground truth has zero l1 norm")
    return float(np.abs(pred - gt).sum() / denom)


def psnr(pred, gt, peak: float = 1.0) -> float:
    if peak <= 0:
        raise ParameterError(f"peak must be positive, got {peak}")
    pred, gt = _pair(pred, gt)
    mse = np.mean((pred - gt) ** 2)
    if mse == 0:
        return PSNR_CAP
    return float(min(PSNR_CAP, 10 * np.log10(peak * peak / mse)))


def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2
    g = np.exp(-(x * x) / (2 * sigma * sigma))
    return g / g.sum()


def _filter_valid(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    k = len(g)
    h, w = img.shape[-2:]
    rows = sum(g[i] * img[..., :, i:i + w - k + 1] for i in range(k))
    return sum(g[i] * rows[..., i:i + h - k + 1, :] for i in range(k))


def ssim_map(pred, gt, peak: float = 1.0) -> np.ndarray:
    pred, gt = _pair(pred, gt)
    if min(pred.shape[-2:]) < SSIM_WINDOW:
        raise ParameterError(f"ssim needs images at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {pred.shape[-2:]}")
    g = _gaussian_window()
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    mu_x = _filter_valid(pred, g)
    mu_y = _filter_valid(gt, g)
    xx = _filter_valid(pred * pred, g) - mu_x * mu_x
    yy = _filter_valid(gt * gt, g) - mu_y * mu_y
    xy = _filter_valid(pred * gt, g) - mu_x * mu_y
    num = (2 * (mu_x * mu_y) + c1) * (2 * xy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (xx + yy + c2)
    return num / den


def ssim(pred, gt, peak: float = 1.0) -> float:
    """Mean SSIM over valid 11x11 Gaussian windows (sigma 1.5), averaged over channels."""
    return float(ssim_map(pred, gt, peak).mean())


def edge_precision_recall(pred, gt, m, tolerance: int = 0):
    """Precision and recall of binary edges inside the mask.

    With ``tolerance > 0`` a pixel counts as matched when an opposite edge
    lies within that Chebyshev distance. Empty denominators give 0 and a
    :class:`DegenerateInputWarning`.
    """
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    m = np.asarray(m)
    if pred.shape != gt.shape or pred.shape != m.shape:
        raise ShapeError(f"shapes differ: pred {pred.shape}, gt {gt.shape}, mask {m.shape}")
    if not (is_binary(pred) and is_binary(gt)):
        raise ParameterError("edge_precision_recall expects binary edge maps")
    inside = m > 0
    p = (pred > 0) & inside
    t = (gt > 0) & inside
    if tolerance > 0:
        footprint = np.ones((2 * tolerance + 1,) * 2, dtype=bool)
        near_t = ndimage.binary_dilation(t, footprint)
        near_p = ndimage.binary_dilation(p, footprint)
    else:
        near_t, near_p = t, p
    n_pred, n_gt = int(p.sum()), int(t.sum())
    if n_pred == 0 or n_gt == 0:
        warnings.warn("edge_precision_recall: empty prediction or ground truth in mask",
                      DegenerateInputWarning)
    precision = float((p & near_t).sum() / n_pred) if n_pred else 0.0
    recall = float((t & near_p).sum() / n_gt) if n_gt else 0.0
    return precision, recall


@dataclass
class GaussianStats:
    mu: np.ndarray
    sigma: np.ndarray


def fit_gaussian(features) -> GaussianStats:
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 2:
        raise ShapeError(f"features must be n x d, got shape {f.shape}")
    if f.shape[0] < 2:
        raise ParameterError("fit_gaussian needs at least 2 samples")
    mu = f.mean(axis=0)
    centered = f - mu
    cov = centered.T @ centered / (f.shape[0] - 1)
    return GaussianStats(mu, (cov + cov.T) / 2)


def _sqrt_psd(a: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh((a + a.T) / 2)
    return (vecs * np.sqrt(np.clip(vals, 0, None))) @ vecs.T


def frechet_distance(a: GaussianStats, b: GaussianStats) -> float:
    """Squared Wasserstein-2 distance between two Gaussians.

    ``Tr((Sa Sb)^(1/2))`` is taken as the trace of the symmetric square root of
    ``Sa^(1/2) Sb Sa^(1/2)``, with negative eigenvalues clamped to zero.
    """
    mu_a, mu_b = np.atleast_1d(a.mu), np.atleast_1d(b.mu)
    sa, sb = np.atleast_2d(a.sigma), np.atleast_2d(b.sigma)
    if mu_a.shape != mu_b.shape or sa.shape != sb.shape:
        raise ShapeError(f"dimension mismatch: {mu_a.shape[0]} vs {mu_b.shape[0]}")
    root_a = _sqrt_psd(sa)
    inner = root_a @ sb @ root_a
    eig = np.linalg.eigvalsh((inner + inner.T) / 2)
    tr_covmean = np.sqrt(np.clip(eig, 0, None)).sum()
    diff = mu_a - mu_b
    d = diff @ diff + np.trace(sa) + np.trace(sb) - 2 * tr_covmean
    return float(max(d, 0.0))


def extract_features(images, extractor=None) -> np.ndarray:
    """Global-average-pooled last-layer activations, one row per image."""
    net = extractor if extractor is not None else build_feature_extractor()
    out, _ = forward(net, images)
    return out.mean(axis=(2, 3)).astype(np.float64)


def fid(real_images, fake_images, extractor=None) -> float:
    return frechet_distance(
        fit_gaussian(extract_features(real_images, extractor)),
        fit_gaussian(extract_features(fake_images, extractor)),
    )


@dataclass
class MetricRecord:
    id: str
    bucket: str
    rel_l1: float
    ssim: float
    psnr: float
    precision: float
    recall: float


@dataclass
class BucketAggregate:
    bucket: str
    count: int
    means: dict
    fid: Optional[float] = None


@dataclass
class MetricsReport:
    records: list
    buckets: list
    overall: BucketAggregate
    fid: dict = field(default_factory=dict)
    skipped: int = 0


def _bucket_order(label: str) -> int:
    return ALL_BUCKETS.index(label) if label in ALL_BUCKETS else len(ALL_BUCKETS)


def _mean_of(records) -> dict:
    return {k: float(np.mean([getattr(r, k) for r in records])) for k in METRIC_FIELDS}


def aggregate(records, fid_by_bucket: Optional[dict] = None) -> MetricsReport:
    """Per-bucket and overall arithmetic means, buckets in ascending coverage order."""
    records = list(records)
    if not records:
        raise ParameterError("aggregate needs at least one record")
    fid_by_bucket = fid_by_bucket or {}
    groups = {}
    for r in records:
        groups.setdefault(r.bucket, []).append(r)
    buckets = [
        BucketAggregate(b, len(groups[b]), _mean_of(groups[b]), fid_by_bucket.get(b))
        for b in sorted(groups, key=lambda b: (_bucket_order(b), b))
    ]
    overall = BucketAggregate("all", len(records), _mean_of(records), fid_by_bucket.get("all"))
    return MetricsReport(records, buckets, overall, dict(fid_by_bucket))


def _fmt(v) -> str:
    return "" if v is None else f"{v:.6f}"


def report_to_csv(report: MetricsReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in report.records:
        row = asdict(r)
        w.writerow([row["id"], row["bucket"]] + [_fmt(row[k]) for k in METRIC_FIELDS])
    w.writerow([AGG_PREFIX, "bucket", "count", *METRIC_FIELDS, "fid"])
    for agg in report.buckets + [report.overall]:
        w.writerow([AGG_PREFIX, agg.bucket, agg.count]
                   + [_fmt(agg.means[k]) for k in METRIC_FIELDS] + [_fmt(agg.fid)])
    return buf.getvalue()


def parse_report_csv(text: str):
    """Split a report CSV into ``(record rows, aggregate rows)`` lists of dicts."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ValueError("not a metrics report: bad header")
    records, aggs, agg_header = [], [], None
    for row in rows[1:]:
        if row and row[0] == AGG_PREFIX:
            if agg_header is None:
                agg_header = row[1:]
            else:
                aggs.append(dict(zip(agg_header, row[1:])))
        else:
            records.append(dict(zip(CSV_HEADER, row)))
    return records, aggs
