"""Dataset preprocessing, two-stage inference, evaluation and the sigma sweep."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import edge_ops, mask_engine, metrics
from .config import PipelineConfig
from .errors import ParameterError, ShapeError
from .imageio import load_image
from .networks import build_generator, forward, load_weights
from .tensor_core import DTYPE, as_tensor, bilinear_resize, center_crop

log = logging.getLogger(__name__)

CELEBA_CROP = 178
PSV_CROP = 537
TARGET = 256
EDGE_THRESHOLD = 0.5


def preprocess_celeba(img, size: int = TARGET) -> np.ndarray:
    """Centre 178x178 crop, then bilinear resize."""
    img = as_tensor(img)
    if min(img.shape[2:]) < CELEBA_CROP:
        raise ParameterError(f"CelebA image must be at least {CELEBA_CROP}px per side, got {img.shape[2:]}")
    return bilinear_resize(center_crop(img, CELEBA_CROP, CELEBA_CROP), size, size)


def psv_offsets(width: int) -> list:
    return [0, (width - PSV_CROP) // 2, width - PSV_CROP]


def preprocess_psv(img, size: int = TARGET) -> list:
    """Left, middle and right 537x537 squares (overlapping when narrower than 3x537)."""
    img = as_tensor(img)
    h, w = img.shape[2:]
    if h != PSV_CROP or w < PSV_CROP:
        raise ParameterError(f"Paris StreetView image must be {PSV_CROP} high and >= {PSV_CROP} wide, got {h}x{w}")
    return [bilinear_resize(img[:, :, :, x:x + PSV_CROP], size, size) for x in psv_offsets(w)]


@dataclass
class Models:
    g1: object
    g2: object


def build_models(cfg: PipelineConfig) -> Models:
    """Generators from the configured archives, or seeded random init with a warning."""
    g1 = build_generator("edge", seed=cfg.seed)
    g2 = build_generator("inpaint", seed=cfg.seed + 1)
    for net, path in ((g1, cfg.edge_weights), (g2, cfg.inpaint_weights)):
        if path:
            load_weights(net, path)
        else:
            log.warning("no weights for %s; using random initialization (seed %d)", net.name, cfg.seed)
    return Models(g1, g2)


def run_inference(cfg: PipelineConfig, image, mask, models: Models = None) -> dict:
    """Edge generation then image completion for one ``(1, 3, h, w)`` image.

    Returns ``c_gt``, ``c_prob``, ``c_pred`` (binarized), ``c_comp``, ``i_pred``
    and ``i_comp``.
    """
    image = as_tensor(image, "image")
    if image.shape[:2] != (1, 3):
        raise ShapeError(f"run_inference expects a single RGB image, got shape {image.shape}")
    m = np.asarray(mask).astype(DTYPE)
    if m.shape != image.shape[2:]:
        raise ShapeError(f"mask {m.shape} does not match image {image.shape[2:]}")
    models = models or build_models(cfg)

    gray = edge_ops.to_grayscale(image)
    c_gt = edge_ops.canny(gray, cfg.canny_params())
    g1_in = np.concatenate(
        [edge_ops.mask_out(gray, m), edge_ops.mask_out(c_gt, m)[None, None], m[None, None]], axis=1
    )
    c_prob, _ = forward(models.g1, g1_in)
    c_pred = (c_prob[0, 0] >= EDGE_THRESHOLD).astype(DTYPE)
    c_comp = edge_ops.composite_edges(c_gt, c_pred, m)

    g2_in = np.concatenate([edge_ops.mask_out(image, m), c_comp[None, None]], axis=1)
    i_pred, _ = forward(models.g2, g2_in)
    i_comp = edge_ops.composite_image(image, i_pred, m)
    return {
        "c_gt": c_gt,
        "c_prob": c_prob[0, 0],
        "c_pred": c_pred,
        "c_comp": c_comp,
        "i_pred": i_pred,
        "i_comp": i_comp,
    }


def _fit_size(img: np.ndarray, size: int) -> np.ndarray:
    return img if img.shape[2:] == (size, size) else bilinear_resize(img, size, size)


def load_items(cfg: PipelineConfig, images):
    """Resolve paths or ``(id, tensor)`` pairs into sized tensors.

    Unreadable files are logged and skipped; returns ``(items, skipped)``.
    """
    items, skipped = [], 0
    for entry in images:
        if isinstance(entry, tuple):
            ident, img = entry
        else:
            ident = Path(entry).name
            try:
                img = load_image(entry)
            except OSError as exc:
                log.warning("skipping %s: %s", entry, exc)
                skipped += 1
                continue
        try:
            if cfg.preprocess == "celeba":
                parts = [(ident, preprocess_celeba(img, cfg.image_size))]
            elif cfg.preprocess == "psv":
                crops = preprocess_psv(img, cfg.image_size)
                parts = [(f"{ident}#{side}", c) for side, c in zip(("left", "middle", "right"), crops)]
            else:
                parts = [(ident, img)]
        except ParameterError as exc:
            log.warning("skipping %s: %s", ident, exc)
            skipped += 1
            continue
        items += [(i, _fit_size(as_tensor(x), cfg.image_size)) for i, x in parts]
    return items, skipped


def _resize_mask(m: np.ndarray, size: int) -> np.ndarray:
    if m.shape == (size, size):
        return m
    rows = (np.arange(size) * m.shape[0]) // size
    cols = (np.arange(size) * m.shape[1]) // size
    return m[rows][:, cols]


def masks_for(cfg: PipelineConfig, n: int) -> list:
    """One mask per item: seeded regular squares, or a directory cycled in name order."""
    size = cfg.image_size
    if cfg.mask_dir is not None:
        paths = sorted(p for p in Path(cfg.mask_dir).iterdir() if p.is_file())
        if not paths:
            raise OSError(f"no mask files in {cfg.mask_dir}")
        loaded = [_resize_mask(mask_engine.load_mask(p), size) for p in paths]
        return [loaded[i % len(loaded)] for i in range(n)]
    seeds = np.random.SeedSequence(cfg.seed).spawn(n)
    return [
        mask_engine.regular_mask(size, size, cfg.effective_mask_ratio,
                                 int(s.generate_state(1)[0]), cfg.mask_placement)
        for s in seeds
    ]


def _record(ident: str, image, m, out: dict, composite: bool) -> metrics.MetricRecord:
    result = out["i_comp"] if composite else out["i_pred"]
    precision, recall = metrics.edge_precision_recall(out["c_pred"], out["c_gt"], m)
    return metrics.MetricRecord(
        id=ident,
        bucket=mask_engine.coverage_class(m),
        rel_l1=metrics.relative_l1(result, image),
        ssim=metrics.ssim(result, image),
        psnr=metrics.psnr(result, image),
        precision=precision,
        recall=recall,
    )


def evaluate(cfg: PipelineConfig, images, masks=None, models: Models = None):
    """Run inference over ``images`` and score each result.

    Returns ``(report, csv_text)``; ``report.skipped`` counts unreadable inputs.
    """
    items, skipped = load_items(cfg, images)
    if not items:
        raise ParameterError("evaluate: no readable images")
    masks = masks if masks is not None else masks_for(cfg, len(items))
    models = models or build_models(cfg)
    records, reals, fakes = [], {}, {}
    for (ident, img), m in zip(items, masks):
        out = run_inference(cfg, img, m, models)
        rec = _record(ident, img, m, out, cfg.composite)
        records.append(rec)
        result = out["i_comp"] if cfg.composite else out["i_pred"]
        for key in (rec.bucket, "all"):
            reals.setdefault(key, []).append(img)
            fakes.setdefault(key, []).append(result)
    fid_by_bucket = {}
    if cfg.fid:
        for key in reals:
            if len(reals[key]) >= 2:
                fid_by_bucket[key] = metrics.fid(np.concatenate(reals[key]), np.concatenate(fakes[key]))
    report = metrics.aggregate(records, fid_by_bucket)
    report.skipped = skipped
    return report, metrics.report_to_csv(report)


SWEEP_HEADER = ("sigma", "edge_density") + metrics.METRIC_FIELDS


def sigma_sweep(cfg: PipelineConfig, images, sigmas, include_metrics=None, models: Models = None):
    """Edge density (and optionally metric means) per Canny sigma, ascending.

    Metrics are included by default only when weights are configured.
    Returns ``(rows, csv_text)``.
    """
    sigmas = sorted({float(s) for s in sigmas})
    if not sigmas:
        raise ParameterError("sigma_sweep needs at least one sigma")
    if sigmas[0] < 0:
        raise ParameterError(f"sigma must be >= 0, got {sigmas[0]}")
    if include_metrics is None:
        include_metrics = bool(cfg.edge_weights or cfg.inpaint_weights)
    items, _ = load_items(cfg, images)
    if not items:
        raise ParameterError("sigma_sweep: no readable images")
    if include_metrics:
        models = models or build_models(cfg)
        masks = masks_for(cfg, len(items))
    rows = []
    for sigma in sigmas:
        scfg = replace(cfg, sigma=sigma)
        params = scfg.canny_params()
        density = float(np.mean([
            edge_ops.canny(edge_ops.to_grayscale(img), params).mean() for _, img in items
        ]))
        row = {"sigma": sigma, "edge_density": density}
        if include_metrics:
            report, _ = evaluate(scfg, items, masks, models)
            row.update(report.overall.means)
        rows.append(row)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for row in rows:
        w.writerow([f"{row[k]:.6f}" if k in row else "" for k in SWEEP_HEADER])
    return rows, buf.getvalue()
