"""Detection and calibration metrics: COCO-style average precision over
IoU thresholds, and probabilistic-maturity audits (NLL, MAE of the Beta
means, central credible-interval coverage, PIT uniformity) computed
against the generator's hidden maturities.

Maturity metrics pair detections to ground truths greedily in score
order at IoU >= 0.5, keeping only detections with objectness >= the
operating threshold; AP always uses all detections.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import betadist, geometry

AP_THRESHOLDS = tuple(0.50 + 0.05 * k for k in range(10))
DEFAULT_COVERAGE_LEVELS = (0.5, 0.8, 0.9)
MATURITY_IOU = 0.5
MIN_PIT_PAIRS = 100


@dataclass(frozen=True)
class EvalReport:
    """Flat metric bundle; maturity fields are None when nothing matched."""

    ap50: float
    ap75: float
    ap_50_95: float
    maturity_mae: float | None
    mean_nll: float | None
    coverage: dict[float, float] | None
    pit_ks_stat: float | None
    n_matched: int


def _det_arrays(dets):
    boxes = np.array([[d.box.cx, d.box.cy, d.box.w, d.box.h] for d in dets])
    scores = np.array([d.p_obj for d in dets])
    return boxes, scores


def _pooled_order(dets_by_image):
    """Indices of all detections, score-descending; ties broken by image
    then by per-image detection order, so the sweep is deterministic."""
    entries = []
    for img, dets in enumerate(dets_by_image):
        for k, d in enumerate(dets):
            entries.append((-d.p_obj, img, k))
    entries.sort()
    return [(img, k) for _, img, k in entries]


def average_precision(dets_by_image, gts_by_image, iou_threshold: float) -> float:
    """101-point interpolated AP at one IoU threshold.

    Detections are swept in descending score order; each ground truth can
    satisfy at most one detection (greedy best-IoU matching).
    """
    n_gt = sum(len(g) for g in gts_by_image)
    if n_gt == 0:
        raise ValueError("average_precision is undefined with zero ground truths")

    iou_by_image = []
    for dets, gts in zip(dets_by_image, gts_by_image):
        if len(dets) == 0 or len(gts) == 0:
            iou_by_image.append(np.zeros((len(dets), len(gts))))
            continue
        d_xyxy = geometry.cxcywh_to_xyxy(_det_arrays(dets)[0])
        g_xyxy = geometry.cxcywh_to_xyxy(
            np.array([[g.box.cx, g.box.cy, g.box.w, g.box.h] for g in gts]))
        iou_by_image.append(geometry.iou_matrix(d_xyxy, g_xyxy))

    used = [np.zeros(len(g), dtype=bool) for g in gts_by_image]
    tp = []
    for img, k in _pooled_order(dets_by_image):
        ious = iou_by_image[img]
        best_iou, best_j = 0.0, -1
        for j in range(ious.shape[1]):
            if not used[img][j] and ious[k, j] > best_iou:
                best_iou, best_j = ious[k, j], j
        if best_j >= 0 and best_iou >= iou_threshold:
            used[img][best_j] = True
            tp.append(1.0)
        else:
            tp.append(0.0)

    if not tp:
        return 0.0
    tp = np.array(tp)
    cum_tp = np.cumsum(tp)
    precision = cum_tp / np.arange(1, len(tp) + 1)
    recall = cum_tp / n_gt

    ap = 0.0
    for r in np.linspace(0.0, 1.0, 101):
        mask = recall >= r - 1e-12
        ap += precision[mask].max() if mask.any() else 0.0
    return ap / 101.0


def ap_sweep(dets_by_image, gts_by_image) -> tuple[float, float, float]:
    """(AP50, AP75, mean AP over thresholds 0.50:0.05:0.95)."""
    aps = [average_precision(dets_by_image, gts_by_image, t) for t in AP_THRESHOLDS]
    return aps[0], aps[5], float(np.mean(aps))


def match_predictions(dets_by_image, gts_by_image,
                      score_threshold: float = 0.30):
    """Greedy score-ordered matching at IoU >= 0.5 for maturity metrics.

    Returns (BetaParams, y_true) pairs for every detection with
    objectness >= score_threshold that claims an unused ground truth.
    """
    pairs = []
    used = [np.zeros(len(g), dtype=bool) for g in gts_by_image]
    for img, k in _pooled_order(dets_by_image):
        det = dets_by_image[img][k]
        if det.p_obj < score_threshold:
            continue
        gts = gts_by_image[img]
        if len(gts) == 0:
            continue
        d_xyxy = geometry.cxcywh_to_xyxy(
            np.array([[det.box.cx, det.box.cy, det.box.w, det.box.h]]))
        g_xyxy = geometry.cxcywh_to_xyxy(
            np.array([[g.box.cx, g.box.cy, g.box.w, g.box.h] for g in gts]))
        ious = geometry.iou_matrix(d_xyxy, g_xyxy)[0]
        best_j = -1
        best_iou = 0.0
        for j in range(len(gts)):
            if not used[img][j] and ious[j] > best_iou:
                best_iou, best_j = ious[j], j
        if best_j >= 0 and best_iou >= MATURITY_IOU:
            used[img][best_j] = True
            pairs.append((det.maturity, gts[best_j].y_true))
    return pairs


def maturity_mae(pairs) -> float | None:
    """Mean |Beta mean - hidden maturity| over matched pairs; None if empty."""
    if not pairs:
        return None
    return float(np.mean([abs(betadist.mean(p) - y) for p, y in pairs]))


def mean_nll(pairs) -> float | None:
    """Mean -log_pdf of the hidden maturity under each prediction."""
    if not pairs:
        return None
    return float(np.mean([-betadist.log_pdf(p, y) for p, y in pairs]))


def coverage(pairs, levels=DEFAULT_COVERAGE_LEVELS) -> dict[float, float]:
    """Empirical coverage of central credible intervals per nominal level."""
    if not pairs:
        raise ValueError("coverage requires at least one matched pair")
    qcache: dict[tuple[float, float, float], float] = {}

    def quant(p: betadist.BetaParams, q: float) -> float:
        key = (p.alpha, p.beta, q)
        if key not in qcache:
            qcache[key] = betadist.quantile(p, q)
        return qcache[key]

    out = {}
    for level in levels:
        lo_q = (1.0 - level) / 2.0
        hi_q = (1.0 + level) / 2.0
        hits = sum(
            1 for p, y in pairs if quant(p, lo_q) <= y <= quant(p, hi_q))
        out[level] = hits / len(pairs)
    return out


def ks_uniform(values: np.ndarray) -> float:
    """Kolmogorov-Smirnov distance of a sample to the uniform law on [0, 1]."""
    u = np.sort(np.asarray(values, dtype=np.float64))
    n = len(u)
    i = np.arange(1, n + 1)
    d_plus = (i / n - u).max()
    d_minus = (u - (i - 1) / n).max()
    return float(max(d_plus, d_minus))


def pit_ks(pairs) -> float:
    """KS statistic of the probability integral transform of the pairs."""
    if len(pairs) < MIN_PIT_PAIRS:
        raise ValueError(
            f"PIT needs at least {MIN_PIT_PAIRS} matched pairs, got {len(pairs)}")
    us = np.array([betadist.cdf(p, y) for p, y in pairs])
    return ks_uniform(us)


def self_consistency_pairs(params_list, n_total: int, rng):
    """Harness validation pairs: maturities sampled from the predictions
    themselves (cycling the list), so coverage/PIT must hit nominal."""
    if not params_list:
        raise ValueError("need at least one predicted distribution")
    pairs = []
    for k in range(n_total):
        p = params_list[k % len(params_list)]
        pairs.append((p, betadist.sample(p, rng)))
    return pairs


def evaluate(dets_by_image, gts_by_image, levels=DEFAULT_COVERAGE_LEVELS,
             score_threshold: float = 0.30) -> EvalReport:
    """Full report: AP sweep plus maturity metrics on matched pairs."""
    ap50, ap75, ap_mean = ap_sweep(dets_by_image, gts_by_image)
    pairs = match_predictions(dets_by_image, gts_by_image, score_threshold)
    if pairs:
        cov = coverage(pairs, levels)
        pit = pit_ks(pairs) if len(pairs) >= MIN_PIT_PAIRS else None
    else:
        cov = None
        pit = None
    return EvalReport(
        ap50=ap50, ap75=ap75, ap_50_95=ap_mean,
        maturity_mae=maturity_mae(pairs),
        mean_nll=mean_nll(pairs),
        coverage=cov,
        pit_ks_stat=pit,
        n_matched=len(pairs),
    )


# ---------------------------------------------------------------------------
# Report serialization: flat CSV plus an aligned text echo.

def _fmt(v) -> str:
    return "" if v is None else f"{v:.9g}"


def report_csv(report: EvalReport) -> str:
    levels = sorted(report.coverage) if report.coverage else list(DEFAULT_COVERAGE_LEVELS)
    header = ["ap50", "ap75", "ap_50_95", "maturity_mae", "mean_nll"]
    values = [report.ap50, report.ap75, report.ap_50_95,
              report.maturity_mae, report.mean_nll]
    for level in levels:
        header.append(f"coverage_{round(level * 100):d}")
        values.append(report.coverage[level] if report.coverage else None)
    header += ["pit_ks_stat", "n_matched"]
    values += [report.pit_ks_stat, report.n_matched]
    return ",".join(header) + "\n" + ",".join(_fmt(v) for v in values) + "\n"


def report_table(report: EvalReport) -> str:
    rows = [
        ("AP50", report.ap50),
        ("AP75", report.ap75),
        ("AP50:95", report.ap_50_95),
        ("maturity MAE", report.maturity_mae),
        ("mean NLL", report.mean_nll),
    ]
    if report.coverage:
        for level in sorted(report.coverage):
            rows.append((f"coverage@{level:g}", report.coverage[level]))
    rows.append(("PIT KS", report.pit_ks_stat))
    rows.append(("matched pairs", report.n_matched))
    width = max(len(name) for name, _ in rows)
    lines = []
    for name, value in rows:
        shown = "absent" if value is None else (
            f"{value:.4f}" if isinstance(value, float) else str(value))
        lines.append(f"{name:<{width}}  {shown}")
    return "\n".join(lines) + "\n"
