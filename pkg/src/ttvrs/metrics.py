"""Segmentation quality metrics and reporting.

Region similarity J is the per-frame intersection-over-union averaged over
frames; contour accuracy F is the boundary F-measure with a Chebyshev
pixel tolerance. Frames where prediction and ground truth are both empty
count 1.0 for both metrics: correct rejection is not penalized.

Robustness R uses a local definition (the cited benchmark formula is not
restated in available material): a negative video counts as hallucinated
when its mean predicted-foreground fraction exceeds a small area
threshold, and R is the fraction of negative videos that stay clean.
Reports label the value accordingly.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import ValidationError
from .synthetic import Masklet

DEFAULT_BOUNDARY_TOLERANCE = 1    # ~0.8% of the 64x64 frame diagonal
DEFAULT_HALLUCINATION_EPS = 1e-3  # mean foreground area fraction


def _mask_array(m: Masklet | np.ndarray) -> np.ndarray:
    arr = m.masks if isinstance(m, Masklet) else np.asarray(m)
    if arr.ndim != 3:
        raise ValidationError(f"expected (T, H, W) masklet, got {arr.shape}")
    return arr.astype(bool)


def region_similarity(pred: Masklet | np.ndarray, gt: Masklet | np.ndarray) -> float:
    """Mean per-frame IoU; both-empty frames contribute 1.0."""
    p = _mask_array(pred)
    g = _mask_array(gt)
    if p.shape != g.shape:
        raise ValidationError(f"masklet shapes differ: {p.shape} vs {g.shape}")
    values = []
    for t in range(p.shape[0]):
        union = int(np.logical_or(p[t], g[t]).sum())
        if union == 0:
            values.append(1.0)
        else:
            values.append(int(np.logical_and(p[t], g[t]).sum()) / union)
    return float(np.mean(values))


def boundary_mask(mask: np.ndarray) -> np.ndarray:
    """Foreground pixels with a background 4-neighbor (outside counts as 0)."""
    m = np.asarray(mask).astype(bool)
    pad = np.pad(m, 1, constant_values=False)
    interior = pad[:-2, 1:-1] & pad[2:, 1:-1] & pad[1:-1, :-2] & pad[1:-1, 2:]
    return m & ~interior


def _chebyshev_to_set(points_mask: np.ndarray) -> np.ndarray:
    """Chebyshev distance from every pixel to the nearest set pixel."""
    if not points_mask.any():
        return np.full(points_mask.shape, np.inf)
    return ndimage.distance_transform_cdt(~points_mask, metric="chessboard").astype(np.float64)


def _frame_boundary_f(pred: np.ndarray, gt: np.ndarray, tolerance: int) -> float:
    pb = boundary_mask(pred)
    gb = boundary_mask(gt)
    n_pred = int(pb.sum())
    n_gt = int(gb.sum())
    if n_pred == 0 and n_gt == 0:
        return 1.0
    if n_pred == 0 or n_gt == 0:
        return 0.0
    dist_to_gt = _chebyshev_to_set(gb)
    dist_to_pred = _chebyshev_to_set(pb)
    precision = int((dist_to_gt[pb] <= tolerance).sum()) / n_pred
    recall = int((dist_to_pred[gb] <= tolerance).sum()) / n_gt
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def contour_accuracy(
    pred: Masklet | np.ndarray, gt: Masklet | np.ndarray, tolerance: int = DEFAULT_BOUNDARY_TOLERANCE
) -> float:
    """Mean per-frame boundary F-measure at a Chebyshev pixel tolerance."""
    if tolerance < 0:
        raise ValidationError("tolerance must be >= 0")
    p = _mask_array(pred)
    g = _mask_array(gt)
    if p.shape != g.shape:
        raise ValidationError(f"masklet shapes differ: {p.shape} vs {g.shape}")
    values = [_frame_boundary_f(p[t], g[t], tolerance) for t in range(p.shape[0])]
    return float(np.mean(values))


def foreground_fraction(pred: Masklet | np.ndarray) -> float:
    p = _mask_array(pred)
    return float(p.mean())


def robustness(
    negative_predictions: list, eps: float = DEFAULT_HALLUCINATION_EPS
) -> float | None:
    """Fraction of negative videos below the hallucination area threshold.

    Returns None (not applicable) when there are no negative videos.
    """
    if not negative_predictions:
        return None
    clean = sum(1 for p in negative_predictions if foreground_fraction(p) <= eps)
    return clean / len(negative_predictions)


# ---------------------------------------------------------------------------
# Report assembly
# ---------------------------------------------------------------------------


@dataclass
class VideoMetrics:
    video: str
    j: float
    f: float
    jf: float
    negative: bool
    hallucinated: bool


@dataclass
class MetricsReport:
    per_video: list
    mean_j: float | None
    mean_f: float | None
    mean_jf: float | None
    r: float | None
    num_positive: int
    num_negative: int

    R_DEFINITION = (
        "local definition: fraction of negative videos whose mean predicted "
        "foreground fraction stays at or below the hallucination threshold"
    )


def score_video(
    video_id: str,
    pred: Masklet | np.ndarray,
    gt: Masklet | np.ndarray,
    negative: bool,
    tolerance: int = DEFAULT_BOUNDARY_TOLERANCE,
    eps: float = DEFAULT_HALLUCINATION_EPS,
) -> VideoMetrics:
    j = region_similarity(pred, gt)
    f = contour_accuracy(pred, gt, tolerance)
    hallucinated = bool(negative and foreground_fraction(pred) > eps)
    return VideoMetrics(video=video_id, j=j, f=f, jf=(j + f) / 2.0, negative=negative, hallucinated=hallucinated)


def build_report(per_video: list) -> MetricsReport:
    positives = [v for v in per_video if not v.negative]
    negatives = [v for v in per_video if v.negative]
    mean = lambda xs: float(np.mean(xs)) if xs else None
    r = None if not negatives else 1.0 - sum(v.hallucinated for v in negatives) / len(negatives)
    return MetricsReport(
        per_video=list(per_video),
        mean_j=mean([v.j for v in positives]),
        mean_f=mean([v.f for v in positives]),
        mean_jf=mean([v.jf for v in positives]),
        r=r,
        num_positive=len(positives),
        num_negative=len(negatives),
    )


def report_to_dict(report: MetricsReport, settings: dict | None = None) -> dict:
    return {
        "per_video": [
            {
                "video": v.video,
                "J": v.j,
                "F": v.f,
                "JF": v.jf,
                "negative": v.negative,
                "hallucinated": v.hallucinated,
            }
            for v in report.per_video
        ],
        "aggregate": {
            "J": report.mean_j,
            "F": report.mean_f,
            "JF": report.mean_jf,
            "R": report.r,
            "R_definition": MetricsReport.R_DEFINITION,
            "num_positive": report.num_positive,
            "num_negative": report.num_negative,
        },
        "settings": settings or {},
    }


def write_report_json(report: MetricsReport, path: str | Path, settings: dict | None = None) -> None:
    with open(path, "w") as fh:
        json.dump(report_to_dict(report, settings), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_report_csv(report: MetricsReport, path: str | Path) -> None:
    """Per-video rows plus an aggregate footer (J / F / J&F / R columns)."""
    fmt = lambda v: "NA" if v is None else f"{v:.6f}"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["video", "J", "F", "JF", "negative", "hallucinated"])
        for v in report.per_video:
            writer.writerow(
                [v.video, f"{v.j:.6f}", f"{v.f:.6f}", f"{v.jf:.6f}", int(v.negative), int(v.hallucinated)]
            )
        writer.writerow([])
        writer.writerow(["aggregate_J", "aggregate_F", "aggregate_JF", "R_local_definition"])
        writer.writerow([fmt(report.mean_j), fmt(report.mean_f), fmt(report.mean_jf), fmt(report.r)])


# ---------------------------------------------------------------------------
# Principal-component feature overlays
# ---------------------------------------------------------------------------


def principal_heat(embeddings: np.ndarray) -> np.ndarray:
    """First principal component of a (C, h, w) field, min-max mapped to [0, 1].

    Each spatial location is one sample of dimension C. The component's
    sign is fixed so the projection of largest magnitude is positive;
    zero-variance fields map to all zeros.
    """
    emb = np.asarray(embeddings, dtype=np.float64)
    if emb.ndim != 3:
        raise ValidationError(f"expected (C, h, w) embeddings, got {emb.shape}")
    if not np.all(np.isfinite(emb)):
        raise ValidationError("embeddings must be finite")
    c, h, w = emb.shape
    samples = emb.reshape(c, h * w).T
    centered = samples - samples.mean(axis=0, keepdims=True)
    cov = centered.T @ centered
    eigvals, eigvecs = np.linalg.eigh(cov)
    if eigvals[-1] <= 0:
        return np.zeros((h, w))
    component = eigvecs[:, -1]
    proj = centered @ component
    if proj[np.argmax(np.abs(proj))] < 0:
        proj = -proj
    lo, hi = proj.min(), proj.max()
    if hi - lo == 0:
        return np.zeros((h, w))
    return ((proj - lo) / (hi - lo)).reshape(h, w)


HIGHLIGHT_COLOR = np.array([255, 48, 48], dtype=np.float64)


def blend_heat(frame: np.ndarray, heat: np.ndarray, strength: float = 0.6) -> np.ndarray:
    """Alpha-blend a [0, 1] heat map over a (3, H, W) uint8 frame."""
    img = np.asarray(frame, dtype=np.float64)
    if img.ndim != 3 or img.shape[0] != 3:
        raise ValidationError(f"expected (3, H, W) frame, got {img.shape}")
    a = strength * heat[None, :, :]
    out = (1.0 - a) * img + a * HIGHLIGHT_COLOR[:, None, None]
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def pca_visualize(embeddings: np.ndarray, frame: np.ndarray, strength: float = 0.6) -> np.ndarray:
    """Overlay of the leading embedding component on the frame, (3, H, W) uint8."""
    heat = principal_heat(embeddings)
    h_img = frame.shape[1]
    if h_img % heat.shape[0]:
        raise ValidationError(
            f"frame height {h_img} not a multiple of embedding height {heat.shape[0]}"
        )
    scale = h_img // heat.shape[0]
    heat_full = np.kron(heat, np.ones((scale, scale)))
    return blend_heat(frame, heat_full, strength)
