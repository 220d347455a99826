"""Label assignment: a four-term matching cost (focal objectness, L1 box,
GIoU box, maturity NLL) solved as a rectangular linear assignment.

The maturity term is what distinguishes this matcher from the usual
detection-transformer recipe: predictions must agree with a ground truth
in physical location *and* as maturity distributions before they are
paired for supervision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import betadist, geometry

_FOCAL_ALPHA = 0.25
_FOCAL_GAMMA = 2.0
_PROB_EPS = 1e-8


@dataclass(frozen=True)
class CostWeights:
    """Weights of the four matching-cost terms.

    Defaults follow detection-transformer convention for the class/box
    terms; the maturity weight defaults to a neutral 1.0. All overridable
    through the run configuration.
    """

    lambda_cls: float = 2.0
    lambda_l1: float = 5.0
    lambda_giou: float = 2.0
    lambda_mat: float = 1.0

    def __post_init__(self):
        vals = (self.lambda_cls, self.lambda_l1, self.lambda_giou, self.lambda_mat)
        if not all(math.isfinite(v) and v >= 0.0 for v in vals):
            raise ValueError(f"cost weights must be finite and nonnegative, got {vals}")
        if not any(v > 0.0 for v in vals):
            raise ValueError("at least one cost weight must be positive")


@dataclass(frozen=True)
class MatchResult:
    """One-to-one assignment: every ground truth paired with one prediction."""

    pairs: tuple[tuple[int, int], ...]  # (prediction_index, gt_index)
    total_cost: float


def cls_cost(p_obj: float) -> float:
    """Focal objectness cost in the difference form used by DETR matchers.

    cost = a (1-p)^g (-ln p) - (1-a) p^g (-ln(1-p)), a = 0.25, g = 2;
    strictly decreasing in p, so confident predictions are cheaper.
    """
    p = min(max(p_obj, _PROB_EPS), 1.0 - _PROB_EPS)
    pos = _FOCAL_ALPHA * (1.0 - p) ** _FOCAL_GAMMA * (-math.log(p))
    neg = (1.0 - _FOCAL_ALPHA) * p ** _FOCAL_GAMMA * (-math.log1p(-p))
    return pos - neg


def maturity_cost(p: betadist.BetaParams, y_target: float) -> float:
    """NLL of the target maturity under the predicted distribution.

    No (alpha + beta) regularizer here: matching compares likelihoods only.
    """
    return -betadist.log_pdf(p, y_target)


def build_cost_matrix(preds, gts, w: CostWeights) -> np.ndarray:
    """Pairwise cost of predictions (rows) against ground truths (columns).

    GIoU enters negated so that better overlap lowers the cost. `preds`
    need `.box`, `.p_obj`, `.maturity`; `gts` need `.box`, `.y_target`.
    """
    if len(preds) == 0:
        raise ValueError("build_cost_matrix requires at least one prediction")
    p_obj = np.array([d.p_obj for d in preds], dtype=np.float64)
    boxes = np.array([[d.box.cx, d.box.cy, d.box.w, d.box.h] for d in preds])
    alphas = np.array([d.maturity.alpha for d in preds], dtype=np.float64)
    betas = np.array([d.maturity.beta for d in preds], dtype=np.float64)
    if len(gts) == 0:
        gt_boxes = np.zeros((0, 4), dtype=np.float64)
        gt_targets = np.zeros((0,), dtype=np.float64)
    else:
        gt_boxes = np.array([[g.box.cx, g.box.cy, g.box.w, g.box.h] for g in gts])
        gt_targets = np.array([g.y_target for g in gts], dtype=np.float64)
    return cost_matrix_arrays(p_obj, boxes, alphas, betas, gt_boxes, gt_targets, w)


def cost_matrix_arrays(p_obj: np.ndarray, boxes_cxcywh: np.ndarray,
                       alphas: np.ndarray, betas: np.ndarray,
                       gt_boxes_cxcywh: np.ndarray, gt_targets: np.ndarray,
                       w: CostWeights) -> np.ndarray:
    """Vectorized form of build_cost_matrix over raw arrays."""
    n_pred = p_obj.shape[0]
    n_gt = gt_targets.shape[0]
    if n_gt == 0:
        return np.zeros((n_pred, 0), dtype=np.float64)

    p = np.clip(p_obj, _PROB_EPS, 1.0 - _PROB_EPS)
    c_cls = (
        _FOCAL_ALPHA * (1.0 - p) ** _FOCAL_GAMMA * (-np.log(p))
        - (1.0 - _FOCAL_ALPHA) * p ** _FOCAL_GAMMA * (-np.log1p(-p))
    )[:, None]

    a_xyxy = geometry.cxcywh_to_xyxy(boxes_cxcywh)
    b_xyxy = geometry.cxcywh_to_xyxy(gt_boxes_cxcywh)
    c_l1 = geometry.l1_matrix(boxes_cxcywh, gt_boxes_cxcywh)
    c_giou = -geometry.giou_matrix(a_xyxy, b_xyxy)

    y = np.array([betadist.clamp_unit(float(t)) for t in gt_targets])
    ln_y = np.log(y)[None, :]
    ln_1my = np.log1p(-y)[None, :]
    ln_b = np.array([
        betadist.lgamma(a) + betadist.lgamma(b) - betadist.lgamma(a + b)
        for a, b in zip(alphas, betas)
    ])[:, None]
    c_mat = -((alphas[:, None] - 1.0) * ln_y + (betas[:, None] - 1.0) * ln_1my - ln_b)

    return (
        w.lambda_cls * c_cls
        + w.lambda_l1 * c_l1
        + w.lambda_giou * c_giou
        + w.lambda_mat * c_mat
    )


def hungarian(cost: np.ndarray) -> MatchResult:
    """Minimum-cost injective assignment of columns to rows.

    Requires rows >= cols and finite entries. Solved by scipy's exact
    rectangular assignment; deterministic for identical input.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError(f"cost matrix must be 2-D, got shape {cost.shape}")
    rows, cols = cost.shape
    if cols > rows:
        raise ValueError(f"cost matrix needs rows >= cols, got {rows}x{cols}")
    if cols == 0:
        return MatchResult(pairs=(), total_cost=0.0)
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix entries must be finite")
    row_idx, col_idx = linear_sum_assignment(cost)
    order = np.argsort(col_idx)
    pairs = tuple((int(row_idx[k]), int(col_idx[k])) for k in order)
    total = float(cost[row_idx, col_idx].sum())
    return MatchResult(pairs=pairs, total_cost=total)
