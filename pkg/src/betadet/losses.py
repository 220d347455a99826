"""Composite training objective: varifocal objectness loss, L1 + GIoU box
losses, and the Beta negative log-likelihood maturity loss with its
(alpha + beta) growth regularizer, aggregated across decoder layers
(deep supervision).

Scalar forms (`vfl`, `giou_loss`, `maturity_loss`, `composite_loss`)
define the reference arithmetic; `batch_loss_graph` expresses the same
formulas through the autograd engine for training. Matching is computed
before the loss and treated as fixed: no gradient flows through the
assignment, and the VFL quality target q (the matched pair's IoU) is a
detached constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from . import betadist, geometry
from .assignment import MatchResult

_VFL_ALPHA = 0.75
_VFL_GAMMA = 2.0
_PROB_EPS = 1e-8


@dataclass(frozen=True)
class LossWeights:
    """Composite-loss term weights plus the maturity regularizer strength.

    Box weights follow detection-transformer convention; lambda_reg is
    small so the growth penalty never dominates the NLL at desk scale.
    """

    lambda_vfl: float = 1.0
    lambda_bbox: float = 5.0
    lambda_giou: float = 2.0
    lambda_maturity: float = 1.0
    lambda_reg: float = 1e-3

    def __post_init__(self):
        vals = (self.lambda_vfl, self.lambda_bbox, self.lambda_giou,
                self.lambda_maturity, self.lambda_reg)
        if not all(math.isfinite(v) and v >= 0.0 for v in vals):
            raise ValueError(f"loss weights must be finite and nonnegative, got {vals}")


@dataclass(frozen=True)
class LossTerms:
    """Unweighted loss components; total applies the lambda weights."""

    vfl: float
    bbox_l1: float
    giou: float
    maturity: float
    total: float


@dataclass(frozen=True)
class LossBreakdown:
    vfl: float
    bbox_l1: float
    giou: float
    maturity: float
    total: float
    per_layer: tuple[LossTerms, ...] = field(default=())


def maturity_loss(p: betadist.BetaParams, y_target: float, lambda_reg: float) -> float:
    """-log_pdf(p, y_target) + lambda_reg * (alpha + beta)."""
    return -betadist.log_pdf(p, y_target) + lambda_reg * (p.alpha + p.beta)


def vfl(p_obj: float, q: float, is_positive: bool) -> float:
    """Varifocal objectness loss for one prediction.

    Positives are pulled toward the IoU quality target q (a constant, no
    gradient through it); negatives are down-weighted by the focal factor
    alpha * p^gamma so easy background stays cheap.
    """
    if not (0.0 <= q <= 1.0):
        raise ValueError(f"quality target must be in [0, 1], got {q}")
    p = min(max(p_obj, _PROB_EPS), 1.0 - _PROB_EPS)
    if is_positive:
        return -q * (q * math.log(p) + (1.0 - q) * math.log1p(-p))
    return _VFL_ALPHA * p ** _VFL_GAMMA * (-math.log1p(-p))


def giou_loss(a: geometry.BoxCXCYWH, b: geometry.BoxCXCYWH) -> float:
    """1 - GIoU, in [0, 2)."""
    return 1.0 - geometry.giou(geometry.to_xyxy(a), geometry.to_xyxy(b))


# ---------------------------------------------------------------------------
# Autograd building blocks.

def beta_nll(alpha_t: ag.Tensor, beta_t: ag.Tensor, y: np.ndarray) -> ag.Tensor:
    """Elementwise -log_pdf as an autograd op with the analytic gradient.

    y is clamped here and then constant; the backward pass uses the
    digamma-based derivative of the negative log-likelihood.
    """
    y = np.array([betadist.clamp_unit(float(v)) for v in np.atleast_1d(y)])
    out = -betadist.log_pdf_arrays(alpha_t.data, beta_t.data, y)

    def backward(g):
        d_alpha, d_beta = betadist.nll_grad_arrays(alpha_t.data, beta_t.data, y)
        ag.accumulate(alpha_t, g * d_alpha)
        ag.accumulate(beta_t, g * d_beta)

    return ag.make_op(out, (alpha_t, beta_t), backward, "beta_nll")


def _giou_pairs_graph(pred: ag.Tensor, gt: np.ndarray) -> ag.Tensor:
    """Paired GIoU of (P, 4) predicted cxcywh boxes against constants."""
    half_w = pred[:, 2] * 0.5
    half_h = pred[:, 3] * 0.5
    px0 = pred[:, 0] - half_w
    px1 = pred[:, 0] + half_w
    py0 = pred[:, 1] - half_h
    py1 = pred[:, 1] + half_h
    g_xyxy = geometry.cxcywh_to_xyxy(gt)
    gx0, gy0, gx1, gy1 = (g_xyxy[:, k] for k in range(4))

    iw = ag.relu(ag.minimum(px1, gx1) - ag.maximum(px0, gx0))
    ih = ag.relu(ag.minimum(py1, gy1) - ag.maximum(py0, gy0))
    inter = iw * ih
    area_p = pred[:, 2] * pred[:, 3]
    area_g = (gx1 - gx0) * (gy1 - gy0)
    union = area_p + area_g - inter
    hull = (ag.maximum(px1, gx1) - ag.minimum(px0, gx0)) * (
        ag.maximum(py1, gy1) - ag.minimum(py0, gy0)
    )
    return inter / union - (hull - union) / hull


def _vfl_pos_graph(p: ag.Tensor, q: np.ndarray) -> ag.Tensor:
    p = ag.clip(p, _PROB_EPS, 1.0 - _PROB_EPS)
    return -1.0 * (q * ag.log(p) * q + (1.0 - q) * ag.log(1.0 - p) * q)


def _vfl_neg_graph(p: ag.Tensor) -> ag.Tensor:
    p = ag.clip(p, _PROB_EPS, 1.0 - _PROB_EPS)
    return (-_VFL_ALPHA) * p * p * ag.log(1.0 - p)


def batch_loss_graph(layers, gt_boxes: list[np.ndarray],
                     gt_targets: list[np.ndarray],
                     matches: list[list[MatchResult]],
                     lw: LossWeights,
                     fixed_vfl_quality: list[np.ndarray] | None = None,
                     ) -> tuple[ag.Tensor, LossBreakdown, list[np.ndarray]]:
    """Composite loss over a batch, differentiable through the layer outputs.

    `layers` is a sequence of per-decoder-layer outputs, each carrying
    Tensors boxes (B, Q, 4), p_obj (B, Q), alpha (B, Q), beta (B, Q).
    `matches[l][b]` is the assignment for layer l, image b. Per-image
    losses are normalized by max(1, #gt) and averaged over the batch;
    layer losses are summed with unit layer weights.

    The VFL quality target q (matched-pair IoU) is a detached constant.
    It is normally computed from the current boxes; `fixed_vfl_quality`
    (one array per layer, as returned alongside the loss) pins it so a
    finite-difference probe differentiates the same function the graph
    does.
    """
    n_layers = len(layers)
    if len(matches) != n_layers:
        raise ValueError(f"got {n_layers} layers but {len(matches)} match lists")
    batch = layers[0].p_obj.shape[0]
    n_queries = layers[0].p_obj.shape[1]
    if len(gt_boxes) != batch or len(gt_targets) != batch:
        raise ValueError("ground-truth lists must match the batch size")

    inv_ngt = np.array([1.0 / max(1, len(t)) for t in gt_targets]) / batch

    total = None
    per_layer: list[LossTerms] = []
    comp_sums = [0.0, 0.0, 0.0, 0.0]
    used_quality: list[np.ndarray] = []
    for l, layer in enumerate(layers):
        if len(matches[l]) != batch:
            raise ValueError(f"layer {l} has {len(matches[l])} matches for batch {batch}")
        flat_idx: list[int] = []
        pair_gt_boxes: list[np.ndarray] = []
        pair_targets: list[float] = []
        pair_w: list[float] = []
        matched_mask = np.zeros(batch * n_queries, dtype=bool)
        for b in range(batch):
            for (pi, gi) in matches[l][b].pairs:
                flat_idx.append(b * n_queries + pi)
                pair_gt_boxes.append(gt_boxes[b][gi])
                pair_targets.append(float(gt_targets[b][gi]))
                pair_w.append(inv_ngt[b])
            matched_mask[b * n_queries:(b + 1) * n_queries][
                [pi for (pi, _) in matches[l][b].pairs]] = True
        neg_idx = np.nonzero(~matched_mask)[0]
        neg_w = np.repeat(inv_ngt, n_queries)[neg_idx]

        p_flat = ag.reshape(layer.p_obj, (batch * n_queries,))
        boxes_flat = ag.reshape(layer.boxes, (batch * n_queries, 4))
        alpha_flat = ag.reshape(layer.alpha, (batch * n_queries,))
        beta_flat = ag.reshape(layer.beta, (batch * n_queries,))

        vfl_comp = ag.sum_(_vfl_neg_graph(ag.take(p_flat, neg_idx)) * neg_w)
        if flat_idx:
            idx = np.array(flat_idx, dtype=np.intp)
            gtb = np.stack(pair_gt_boxes)
            tgt = np.array(pair_targets)
            w = np.array(pair_w)

            pred_boxes = ag.take(boxes_flat, idx)
            if fixed_vfl_quality is None:
                q = np.diag(geometry.iou_matrix(
                    geometry.cxcywh_to_xyxy(pred_boxes.data),
                    geometry.cxcywh_to_xyxy(gtb)))
            else:
                q = fixed_vfl_quality[l]
            used_quality.append(q)
            vfl_comp = vfl_comp + ag.sum_(
                _vfl_pos_graph(ag.take(p_flat, idx), q) * w)
            bbox_comp = ag.sum_(
                ag.sum_(ag.absolute(pred_boxes - gtb), axis=1) * w)
            giou_comp = ag.sum_((1.0 - _giou_pairs_graph(pred_boxes, gtb)) * w)
            a_m = ag.take(alpha_flat, idx)
            b_m = ag.take(beta_flat, idx)
            mat_comp = ag.sum_(
                (beta_nll(a_m, b_m, tgt) + lw.lambda_reg * (a_m + b_m)) * w)
        else:
            used_quality.append(np.zeros(0))
            bbox_comp = ag.Tensor(0.0)
            giou_comp = ag.Tensor(0.0)
            mat_comp = ag.Tensor(0.0)

        layer_total = (
            lw.lambda_vfl * vfl_comp
            + lw.lambda_bbox * bbox_comp
            + lw.lambda_giou * giou_comp
            + lw.lambda_maturity * mat_comp
        )
        total = layer_total if total is None else total + layer_total
        terms = LossTerms(
            vfl=vfl_comp.item(), bbox_l1=bbox_comp.item(),
            giou=giou_comp.item(), maturity=mat_comp.item(),
            total=layer_total.item(),
        )
        per_layer.append(terms)
        comp_sums[0] += terms.vfl
        comp_sums[1] += terms.bbox_l1
        comp_sums[2] += terms.giou
        comp_sums[3] += terms.maturity

    breakdown = LossBreakdown(
        vfl=comp_sums[0], bbox_l1=comp_sums[1], giou=comp_sums[2],
        maturity=comp_sums[3], total=total.item(), per_layer=tuple(per_layer),
    )
    return total, breakdown, used_quality


class _ConstLayer:
    """Constant-tensor view of one layer's detections (no gradients)."""

    def __init__(self, dets):
        self.boxes = ag.Tensor(np.array(
            [[d.box.cx, d.box.cy, d.box.w, d.box.h] for d in dets])[None, :, :])
        self.p_obj = ag.Tensor(np.array([d.p_obj for d in dets])[None, :])
        self.alpha = ag.Tensor(np.array([d.maturity.alpha for d in dets])[None, :])
        self.beta = ag.Tensor(np.array([d.maturity.beta for d in dets])[None, :])


def composite_loss(layers, gts, matches: list[MatchResult],
                   lw: LossWeights) -> LossBreakdown:
    """Single-image composite loss over per-layer detection lists.

    `layers[l]` is the list of Detections from decoder layer l, `matches[l]`
    the assignment for that layer against the same ground truths.
    """
    if len(layers) != len(matches):
        raise ValueError(f"got {len(layers)} layers but {len(matches)} matches")
    if len(gts) == 0:
        boxes = np.zeros((0, 4))
        targets = np.zeros((0,))
    else:
        boxes = np.array([[g.box.cx, g.box.cy, g.box.w, g.box.h] for g in gts])
        targets = np.array([g.y_target for g in gts])
    with ag.no_grad():
        _, breakdown, _ = batch_loss_graph(
            [_ConstLayer(dets) for dets in layers],
            [boxes], [targets], [[m] for m in matches], lw)
    return breakdown
