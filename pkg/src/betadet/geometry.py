"""Axis-aligned boxes and the IoU / GIoU / L1 quantities used by the
matching costs, the losses, and the evaluation kit.

Boxes are never clipped here; clipping is a rendering concern. Scalar
dataclass operations are the public surface, and the *_matrix helpers
are the vectorized forms used on prediction/ground-truth batches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BoxCXCYWH:
    """Center/extent box in normalized image coordinates."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        vals = (self.cx, self.cy, self.w, self.h)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"box fields must be finite, got {vals}")
        if self.w <= 0.0 or self.h <= 0.0:
            raise ValueError(f"box extent must be positive, got w={self.w}, h={self.h}")


@dataclass(frozen=True)
class BoxXYXY:
    """Corner box; x0 <= x1 and y0 <= y1."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if self.x0 > self.x1 or self.y0 > self.y1:
            raise ValueError(
                f"corners must be ordered, got ({self.x0}, {self.y0}, {self.x1}, {self.y1})"
            )


def to_xyxy(b: BoxCXCYWH) -> BoxXYXY:
    """(cx - w/2, cy - h/2, cx + w/2, cy + h/2)."""
    return BoxXYXY(
        b.cx - 0.5 * b.w, b.cy - 0.5 * b.h, b.cx + 0.5 * b.w, b.cy + 0.5 * b.h
    )


def to_cxcywh(b: BoxXYXY) -> BoxCXCYWH:
    """Inverse of to_xyxy."""
    return BoxCXCYWH(
        0.5 * (b.x0 + b.x1), 0.5 * (b.y0 + b.y1), b.x1 - b.x0, b.y1 - b.y0
    )


def _intersection_area(a: BoxXYXY, b: BoxXYXY) -> float:
    iw = min(a.x1, b.x1) - max(a.x0, b.x0)
    ih = min(a.y1, b.y1) - max(a.y0, b.y0)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    return iw * ih


def _area(a: BoxXYXY) -> float:
    return (a.x1 - a.x0) * (a.y1 - a.y0)


def iou(a: BoxXYXY, b: BoxXYXY) -> float:
    """Intersection over union; 0 when disjoint or when the union is empty."""
    inter = _intersection_area(a, b)
    union = _area(a) + _area(b) - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def giou(a: BoxXYXY, b: BoxXYXY) -> float:
    """IoU minus the enclosing-hull penalty (hull - union) / hull.

    Degenerate zero-area boxes keep the result finite: if even the hull
    has zero area (two coincident points) the result is 0.
    """
    inter = _intersection_area(a, b)
    union = _area(a) + _area(b) - inter
    hull_w = max(a.x1, b.x1) - min(a.x0, b.x0)
    hull_h = max(a.y1, b.y1) - min(a.y0, b.y0)
    hull = hull_w * hull_h
    if hull <= 0.0:
        return 0.0
    iou_term = inter / union if union > 0.0 else 0.0
    return iou_term - (hull - union) / hull


def l1_box(a: BoxCXCYWH, b: BoxCXCYWH) -> float:
    """|dcx| + |dcy| + |dw| + |dh|."""
    return (
        abs(a.cx - b.cx) + abs(a.cy - b.cy) + abs(a.w - b.w) + abs(a.h - b.h)
    )


# ---------------------------------------------------------------------------
# Vectorized forms over (N, 4) arrays.

def cxcywh_to_xyxy(boxes: np.ndarray) -> np.ndarray:
    """(N, 4) cxcywh -> (N, 4) xyxy."""
    boxes = np.asarray(boxes, dtype=np.float64)
    half = 0.5 * boxes[..., 2:4]
    return np.concatenate([boxes[..., 0:2] - half, boxes[..., 0:2] + half], axis=-1)


def iou_matrix(a_xyxy: np.ndarray, b_xyxy: np.ndarray) -> np.ndarray:
    """Pairwise IoU of (N, 4) x (M, 4) corner boxes -> (N, M)."""
    a = np.asarray(a_xyxy, dtype=np.float64)[:, None, :]
    b = np.asarray(b_xyxy, dtype=np.float64)[None, :, :]
    iw = np.minimum(a[..., 2], b[..., 2]) - np.maximum(a[..., 0], b[..., 0])
    ih = np.minimum(a[..., 3], b[..., 3]) - np.maximum(a[..., 1], b[..., 1])
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    area_a = (a[..., 2] - a[..., 0]) * (a[..., 3] - a[..., 1])
    area_b = (b[..., 2] - b[..., 0]) * (b[..., 3] - b[..., 1])
    union = area_a + area_b - inter
    out = np.zeros(inter.shape, dtype=np.float64)
    np.divide(inter, union, out=out, where=union > 0.0)
    return out


def giou_matrix(a_xyxy: np.ndarray, b_xyxy: np.ndarray) -> np.ndarray:
    """Pairwise GIoU of (N, 4) x (M, 4) corner boxes -> (N, M)."""
    a = np.asarray(a_xyxy, dtype=np.float64)[:, None, :]
    b = np.asarray(b_xyxy, dtype=np.float64)[None, :, :]
    iw = np.minimum(a[..., 2], b[..., 2]) - np.maximum(a[..., 0], b[..., 0])
    ih = np.minimum(a[..., 3], b[..., 3]) - np.maximum(a[..., 1], b[..., 1])
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    area_a = (a[..., 2] - a[..., 0]) * (a[..., 3] - a[..., 1])
    area_b = (b[..., 2] - b[..., 0]) * (b[..., 3] - b[..., 1])
    union = area_a + area_b - inter
    hull = (
        np.maximum(a[..., 2], b[..., 2]) - np.minimum(a[..., 0], b[..., 0])
    ) * (np.maximum(a[..., 3], b[..., 3]) - np.minimum(a[..., 1], b[..., 1]))
    iou_term = np.zeros(inter.shape, dtype=np.float64)
    np.divide(inter, union, out=iou_term, where=union > 0.0)
    penalty = np.zeros(inter.shape, dtype=np.float64)
    np.divide(hull - union, hull, out=penalty, where=hull > 0.0)
    return iou_term - penalty


def l1_matrix(a_cxcywh: np.ndarray, b_cxcywh: np.ndarray) -> np.ndarray:
    """Pairwise L1 box distance of (N, 4) x (M, 4) cxcywh boxes -> (N, M)."""
    a = np.asarray(a_cxcywh, dtype=np.float64)[:, None, :]
    b = np.asarray(b_cxcywh, dtype=np.float64)[None, :, :]
    return np.abs(a - b).sum(axis=-1)
