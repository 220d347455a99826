"""Average precision, maturity metrics, coverage, and PIT, including the
self-consistency harness that validates the calibration machinery."""

import numpy as np
import pytest
import scipy.stats

from betadet import evalkit
from betadet.betadist import BetaParams
from betadet.geometry import BoxCXCYWH
from betadet.model import Detection
from betadet.rng import Xoshiro256
from betadet.synthdata import GroundTruthObject, stage_of, stage_to_target


def _gt(cx, cy, w, h, y_true):
    stage = stage_of(y_true)
    return GroundTruthObject(box=BoxCXCYWH(cx, cy, w, h), stage=stage,
                             y_target=stage_to_target(stage), y_true=y_true)


def _det(cx, cy, w, h, p_obj, alpha=2.0, beta=2.0):
    return Detection(box=BoxCXCYWH(cx, cy, w, h), p_obj=p_obj,
                     maturity=BetaParams(alpha, beta))


class TestAveragePrecision:
    def test_perfect_detections(self):
        gts = [[_gt(0.3, 0.3, 0.2, 0.2, 0.2), _gt(0.7, 0.7, 0.2, 0.2, 0.8)]]
        dets = [[_det(0.3, 0.3, 0.2, 0.2, 0.9), _det(0.7, 0.7, 0.2, 0.2, 0.8)]]
        for t in evalkit.AP_THRESHOLDS:
            assert evalkit.average_precision(dets, gts, t) == pytest.approx(1.0)

    def test_low_iou_detection_scores_zero(self):
        gts = [[_gt(0.3, 0.3, 0.2, 0.2, 0.2)]]
        # IoU 0.4 against the gt
        dets = [[_det(0.3 + 0.2 * 3 / 7, 0.3, 0.2, 0.2, 0.9)]]
        from betadet import geometry
        iou = geometry.iou(geometry.to_xyxy(dets[0][0].box),
                           geometry.to_xyxy(gts[0][0].box))
        assert 0.3 < iou < 0.5
        assert evalkit.average_precision(dets, gts, 0.5) == 0.0

    def test_false_positive_after_true_positive(self):
        gts = [[_gt(0.3, 0.3, 0.2, 0.2, 0.2)]]
        dets = [[_det(0.3, 0.305, 0.2, 0.2, 0.9),     # IoU ~0.9, higher score
                 _det(0.8, 0.8, 0.1, 0.1, 0.5)]]      # IoU 0, lower score
        assert evalkit.average_precision(dets, gts, 0.5) == pytest.approx(1.0)

    def test_empty_gts_rejected(self):
        with pytest.raises(ValueError):
            evalkit.average_precision([[_det(0.5, 0.5, 0.2, 0.2, 0.5)]], [[]], 0.5)

    def test_monotone_in_threshold(self):
        rng = Xoshiro256(50)
        gts, dets = [], []
        for _ in range(20):
            g = [_gt(0.2 + 0.6 * rng.uniform(), 0.2 + 0.6 * rng.uniform(),
                     0.1 + 0.2 * rng.uniform(), 0.1 + 0.2 * rng.uniform(),
                     rng.uniform()) for _ in range(rng.randint(1, 3))]
            d = []
            for obj in g:
                d.append(_det(obj.box.cx + 0.03 * rng.uniform(),
                              obj.box.cy + 0.03 * rng.uniform(),
                              obj.box.w, obj.box.h, rng.uniform()))
            d.append(_det(rng.uniform(), rng.uniform(), 0.2, 0.2, rng.uniform()))
            gts.append(g)
            dets.append(d)
        aps = [evalkit.average_precision(dets, gts, t) for t in evalkit.AP_THRESHOLDS]
        for a, b in zip(aps, aps[1:]):
            assert b <= a + 1e-12

    def test_score_transform_invariance(self):
        rng = Xoshiro256(51)
        gts, dets = [], []
        for _ in range(10):
            g = [_gt(0.5, 0.5, 0.3, 0.3, 0.5)]
            d = [_det(0.5 + 0.1 * rng.uniform(), 0.5, 0.3, 0.3,
                      0.1 + 0.8 * rng.uniform()) for _ in range(3)]
            gts.append(g)
            dets.append(d)
        base = evalkit.average_precision(dets, gts, 0.5)
        squeezed = [[Detection(d.box, d.p_obj ** 3, d.maturity) for d in ds]
                    for ds in dets]
        assert evalkit.average_precision(squeezed, gts, 0.5) == pytest.approx(base)


class TestMaturityMetrics:
    def test_exact_means_give_zero_mae(self):
        pairs = [(BetaParams(4, 4), 0.5), (BetaParams(5, 1), 5.0 / 6.0)]
        assert evalkit.maturity_mae(pairs) == pytest.approx(0.0, abs=1e-12)

    def test_uniform_predictions_mae_quarter(self):
        rng = Xoshiro256(52)
        pairs = [(BetaParams(1, 1), rng.uniform()) for _ in range(10_000)]
        assert evalkit.maturity_mae(pairs) == pytest.approx(0.25, abs=0.01)

    def test_single_pair_value(self):
        assert evalkit.maturity_mae([(BetaParams(5, 1), 0.5)]) == pytest.approx(1.0 / 3.0)

    def test_zero_matches_reported_absent(self):
        assert evalkit.maturity_mae([]) is None
        assert evalkit.mean_nll([]) is None

    def test_match_respects_score_threshold(self):
        gts = [[_gt(0.5, 0.5, 0.2, 0.2, 0.5)]]
        dets = [[_det(0.5, 0.5, 0.2, 0.2, 0.1)]]
        assert evalkit.match_predictions(dets, gts, score_threshold=0.30) == []
        pairs = evalkit.match_predictions(dets, gts, score_threshold=0.05)
        assert len(pairs) == 1

    def test_match_requires_iou_half(self):
        gts = [[_gt(0.3, 0.3, 0.2, 0.2, 0.5)]]
        dets = [[_det(0.7, 0.7, 0.2, 0.2, 0.9)]]
        assert evalkit.match_predictions(dets, gts) == []


class TestCoverage:
    def test_wide_prediction_covers_everything(self):
        # Beta(0.6, 0.6) central 90% interval spans almost all of [0, 1].
        pairs = [(BetaParams(0.6, 0.6), y) for y in np.linspace(0.02, 0.98, 50)]
        cov = evalkit.coverage(pairs, levels=(0.9,))
        assert cov[0.9] >= 0.95

    def test_extreme_level_limits(self):
        # As the level approaches 1 the central interval swallows any
        # truth away from the endpoints.
        pairs = [(BetaParams(3, 3), y) for y in np.linspace(0.01, 0.99, 200)]
        cov = evalkit.coverage(pairs, levels=(0.999999,))
        assert cov[0.999999] == pytest.approx(1.0)

    def test_self_consistency_harness(self):
        # Sampling truths from the predictions themselves: coverage must
        # hit nominal within the binomial tolerance.
        rng = Xoshiro256(54)
        params = [BetaParams(0.7 + 5 * rng.uniform(), 0.7 + 5 * rng.uniform())
                  for _ in range(40)]
        pairs = evalkit.self_consistency_pairs(params, 10_000, Xoshiro256(55))
        cov = evalkit.coverage(pairs, levels=(0.5, 0.8, 0.9))
        for level, got in cov.items():
            assert abs(got - level) <= 0.02, (level, got)


class TestPit:
    def test_needs_enough_pairs(self):
        pairs = [(BetaParams(2, 2), 0.5)] * 99
        with pytest.raises(ValueError):
            evalkit.pit_ks(pairs)

    def test_point_mass_ks(self):
        us = np.full(1000, 0.5)
        assert evalkit.ks_uniform(us) == pytest.approx(0.5)

    def test_uniform_grid_ks(self):
        n = 400
        us = (np.arange(1, n + 1) - 0.5) / n
        assert evalkit.ks_uniform(us) == pytest.approx(0.5 / n, abs=1e-12)

    def test_matches_scipy_kstest(self):
        rng = Xoshiro256(56)
        us = np.array([rng.uniform() for _ in range(500)])
        ref = scipy.stats.kstest(us, "uniform").statistic
        assert evalkit.ks_uniform(us) == pytest.approx(ref, abs=1e-12)

    def test_self_consistency_ks_small(self):
        rng = Xoshiro256(57)
        params = [BetaParams(0.7 + 4 * rng.uniform(), 0.7 + 4 * rng.uniform())
                  for _ in range(25)]
        pairs = evalkit.self_consistency_pairs(params, 10_000, Xoshiro256(58))
        assert evalkit.pit_ks(pairs) < 0.025


class TestReportSerialization:
    def _report(self):
        gts = [[_gt(0.3, 0.3, 0.2, 0.2, 0.2), _gt(0.7, 0.7, 0.2, 0.2, 0.8)]]
        dets = [[_det(0.3, 0.3, 0.2, 0.2, 0.9, 2, 8),
                 _det(0.7, 0.7, 0.2, 0.2, 0.8, 8, 2)]]
        return evalkit.evaluate(dets, gts)

    def test_csv_shape(self):
        report = self._report()
        csv = evalkit.report_csv(report)
        lines = csv.strip().split("\n")
        assert len(lines) == 2
        header = lines[0].split(",")
        values = lines[1].split(",")
        assert header[:5] == ["ap50", "ap75", "ap_50_95", "maturity_mae", "mean_nll"]
        assert "coverage_50" in header and "coverage_90" in header
        assert header[-2:] == ["pit_ks_stat", "n_matched"]
        assert len(header) == len(values)
        assert float(values[0]) == report.ap50

    def test_absent_metrics_serialize_empty(self):
        gts = [[_gt(0.3, 0.3, 0.2, 0.2, 0.2)]]
        dets = [[_det(0.8, 0.8, 0.1, 0.1, 0.9)]]
        report = evalkit.evaluate(dets, gts)
        assert report.maturity_mae is None
        row = evalkit.report_csv(report).strip().split("\n")[1]
        assert ",," in row

    def test_table_renders(self):
        text = evalkit.report_table(self._report())
        assert "AP50" in text and "maturity MAE" in text
