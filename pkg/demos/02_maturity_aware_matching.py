"""Why the matching cost includes a maturity term.

Two predictions sit on exactly the same box with the same objectness;
only their maturity distributions differ. Without the maturity cost the
assignment is a coin flip; with it, each prediction is routed to the
ground truth whose ripeness it actually explains.
Run:  python demos/02_maturity_aware_matching.py
"""

from betadet.assignment import CostWeights, build_cost_matrix, hungarian
from betadet.betadist import BetaParams
from betadet.geometry import BoxCXCYWH
from betadet.model import Detection
from betadet.synthdata import GroundTruthObject, stage_of, stage_to_target


def gt(y_true: float) -> GroundTruthObject:
    stage = stage_of(y_true)
    return GroundTruthObject(box=BoxCXCYWH(0.5, 0.5, 0.2, 0.2), stage=stage,
                             y_target=stage_to_target(stage), y_true=y_true)


box = BoxCXCYWH(0.5, 0.5, 0.2, 0.2)
leans_unripe = Detection(box=box, p_obj=0.6, maturity=BetaParams(2, 8))
leans_ripe = Detection(box=box, p_obj=0.6, maturity=BetaParams(8, 2))
preds = [leans_unripe, leans_ripe]
gts = [gt(0.10), gt(0.90)]  # targets 1/6 and 5/6

for lambda_mat in (1.0, 0.0):
    w = CostWeights(lambda_mat=lambda_mat)
    cost = build_cost_matrix(preds, gts, w)
    result = hungarian(cost)
    print(f"lambda_mat = {lambda_mat}")
    print("  cost matrix:")
    for i, name in enumerate(("Beta(2,8)", "Beta(8,2)")):
        print(f"    {name}: " + "  ".join(f"{cost[i, j]:+7.3f}" for j in range(2)))
    straight = cost[0, 0] + cost[1, 1]
    crossed = cost[0, 1] + cost[1, 0]
    print(f"  straight pairing cost {straight:+.3f}, crossed {crossed:+.3f}")
    print(f"  assignment: {result.pairs} (total {result.total_cost:+.3f})")
    if lambda_mat == 0.0:
        print("  -> geometry and objectness alone cannot break the tie\n")
    else:
        print("  -> the maturity term routes each head to its own ripeness\n")
