"""Matching costs and the Hungarian solve, checked against brute force."""

import itertools
import math

import numpy as np
import pytest

from betadet import assignment as asg
from betadet.betadist import BetaParams
from betadet.geometry import BoxCXCYWH
from betadet.model import Detection
from betadet.rng import Xoshiro256
from betadet.synthdata import GroundTruthObject, stage_of, stage_to_target


def _gt(cx, cy, w, h, y_true):
    stage = stage_of(y_true)
    return GroundTruthObject(
        box=BoxCXCYWH(cx, cy, w, h), stage=stage,
        y_target=stage_to_target(stage), y_true=y_true)


def _det(cx, cy, w, h, p_obj, alpha, beta):
    return Detection(box=BoxCXCYWH(cx, cy, w, h), p_obj=p_obj,
                     maturity=BetaParams(alpha, beta))


def brute_force_min(cost):
    """Exhaustive minimum over injective column -> row assignments."""
    rows, cols = cost.shape
    best = math.inf
    for perm in itertools.permutations(range(rows), cols):
        total = sum(cost[perm[j], j] for j in range(cols))
        best = min(best, total)
    return best


class TestClsCost:
    def test_value_at_half(self):
        assert asg.cls_cost(0.5) == pytest.approx(-0.0866434, abs=1e-6)

    def test_strictly_decreasing(self):
        rng = Xoshiro256(1)
        for _ in range(200):
            p1, p2 = sorted((rng.uniform(), rng.uniform()))
            if p1 == p2:
                continue
            assert asg.cls_cost(p1) > asg.cls_cost(p2)

    def test_clamped_extremes_finite(self):
        assert math.isfinite(asg.cls_cost(0.0))
        assert math.isfinite(asg.cls_cost(1.0))
        assert math.isfinite(asg.cls_cost(1e-8))


class TestMaturityCost:
    def test_uniform_is_zero(self):
        for y in (0.0, 0.3, 1.0):
            assert asg.maturity_cost(BetaParams(1, 1), y) == pytest.approx(0.0, abs=1e-12)

    def test_negated_log_pdf(self):
        assert asg.maturity_cost(BetaParams(2, 2), 0.5) == pytest.approx(
            -math.log(1.5), rel=1e-12)

    def test_wrong_skew_costs_more(self):
        # Beta(8,2) concentrates near 0.8; it should be the cheaper
        # explanation of a ripe target than Beta(2,8).
        ripe = 5.0 / 6.0
        assert asg.maturity_cost(BetaParams(2, 8), ripe) > \
            asg.maturity_cost(BetaParams(8, 2), ripe)


class TestCostMatrix:
    def test_empty_gts(self):
        preds = [_det(0.5, 0.5, 0.2, 0.2, 0.7, 2, 2)]
        cost = asg.build_cost_matrix(preds, [], asg.CostWeights())
        assert cost.shape == (1, 0)
        assert asg.hungarian(cost).pairs == ()

    def test_no_predictions_rejected(self):
        with pytest.raises(ValueError):
            asg.build_cost_matrix([], [], asg.CostWeights())

    def test_perfect_prediction_is_cheapest(self):
        gt = _gt(0.4, 0.6, 0.2, 0.2, 0.9)
        perfect = _det(0.4, 0.6, 0.2, 0.2, 1.0 - 1e-9, 20, 4.0)  # mean ~0.83
        off = [
            _det(0.8, 0.2, 0.2, 0.2, 0.3, 2, 2),
            _det(0.4, 0.6, 0.1, 0.3, 0.5, 2, 20),
        ]
        cost = asg.build_cost_matrix([perfect] + off, [gt], asg.CostWeights())
        assert cost[0, 0] < cost[1, 0] and cost[0, 0] < cost[2, 0]

    def test_matches_manual_formula(self):
        w = asg.CostWeights(lambda_cls=1.5, lambda_l1=3.0, lambda_giou=2.5,
                            lambda_mat=0.75)
        pred = _det(0.45, 0.52, 0.25, 0.18, 0.61, 3.2, 1.7)
        gt = _gt(0.5, 0.5, 0.2, 0.2, 0.41)
        from betadet import geometry
        expected = (
            w.lambda_cls * asg.cls_cost(pred.p_obj)
            + w.lambda_l1 * geometry.l1_box(pred.box, gt.box)
            + w.lambda_giou * (-geometry.giou(geometry.to_xyxy(pred.box),
                                              geometry.to_xyxy(gt.box)))
            + w.lambda_mat * asg.maturity_cost(pred.maturity, gt.y_target)
        )
        cost = asg.build_cost_matrix([pred], [gt], w)
        assert cost[0, 0] == pytest.approx(expected, rel=1e-12)

    def test_maturity_decides_between_identical_boxes(self):
        # Identical boxes and objectness; Betas (2,8) and (8,2); targets
        # 1/6 and 5/6. Only the maturity term can break the tie.
        box = dict(cx=0.5, cy=0.5, w=0.2, h=0.2)
        preds = [_det(**box, p_obj=0.6, alpha=2, beta=8),
                 _det(**box, p_obj=0.6, alpha=8, beta=2)]
        gts = [_gt(**box, y_true=0.1), _gt(**box, y_true=0.9)]  # targets 1/6, 5/6
        cost = asg.build_cost_matrix(preds, gts, asg.CostWeights())
        straight = cost[0, 0] + cost[1, 1]
        crossed = cost[0, 1] + cost[1, 0]
        assert straight < crossed
        result = asg.hungarian(cost)
        assert result.pairs == ((0, 0), (1, 1))
        assert result.total_cost == pytest.approx(straight)
        # Zeroing the maturity weight makes the assignment a cost tie.
        w0 = asg.CostWeights(lambda_mat=0.0)
        cost0 = asg.build_cost_matrix(preds, gts, w0)
        assert cost0[0, 0] + cost0[1, 1] == pytest.approx(cost0[0, 1] + cost0[1, 0])


class TestHungarian:
    def test_small_examples(self):
        r = asg.hungarian(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert r.pairs == ((0, 0), (1, 1))
        assert r.total_cost == 0.0

        r = asg.hungarian(np.array([[1.0, 2.0], [2.0, 1.0]]))
        assert r.total_cost == pytest.approx(2.0)

        r = asg.hungarian(np.array([[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]]))
        assert r.total_cost == pytest.approx(5.0)
        assert dict((g, p) for p, g in r.pairs) == {1: 0, 0: 1, 2: 2}

    def test_input_validation(self):
        with pytest.raises(ValueError):
            asg.hungarian(np.array([[1.0, 2.0]]))  # cols > rows
        with pytest.raises(ValueError):
            asg.hungarian(np.array([[np.inf, 1.0], [1.0, 2.0]]))
        with pytest.raises(ValueError):
            asg.hungarian(np.ones(4))

    def test_brute_force_oracle_1000_trials(self):
        rng = Xoshiro256(99)
        for _ in range(1000):
            rows = rng.randint(1, 7)
            cols = rng.randint(1, rows)
            cost = np.array([[10.0 * rng.uniform() for _ in range(cols)]
                             for _ in range(rows)])
            got = asg.hungarian(cost)
            assert abs(got.total_cost - brute_force_min(cost)) <= 1e-9
            # Structural invariants: injective, every column matched.
            cols_used = [g for _, g in got.pairs]
            rows_used = [p for p, _ in got.pairs]
            assert sorted(cols_used) == list(range(cols))
            assert len(set(rows_used)) == len(rows_used)

    def test_shift_invariance(self):
        rng = Xoshiro256(100)
        for _ in range(100):
            n = rng.randint(2, 5)
            cost = np.array([[10.0 * rng.uniform() for _ in range(n)]
                             for _ in range(n)])
            shift = rng.uniform_in(-5.0, 5.0)
            base = asg.hungarian(cost)
            shifted = asg.hungarian(cost + shift)
            assert shifted.total_cost == pytest.approx(
                base.total_cost + shift * n, abs=1e-9)
            # The returned assignment is still optimal for the shifted matrix.
            assert shifted.total_cost == pytest.approx(
                brute_force_min(cost + shift), abs=1e-9)

    def test_positive_scaling_preserves_optimality(self):
        rng = Xoshiro256(101)
        for _ in range(100):
            n = rng.randint(2, 5)
            cost = np.array([[10.0 * rng.uniform() for _ in range(n)]
                             for _ in range(n)])
            scale = 0.1 + 5.0 * rng.uniform()
            scaled = asg.hungarian(cost * scale)
            assert scaled.total_cost == pytest.approx(
                scale * brute_force_min(cost), rel=1e-9)

    def test_deterministic(self):
        cost = np.array([[1.0, 1.0], [1.0, 1.0]])
        assert asg.hungarian(cost) == asg.hungarian(cost)

    def test_weights_validation(self):
        with pytest.raises(ValueError):
            asg.CostWeights(lambda_cls=0, lambda_l1=0, lambda_giou=0, lambda_mat=0)
        with pytest.raises(ValueError):
            asg.CostWeights(lambda_cls=-1.0)
