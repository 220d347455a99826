"""End-to-end gradient verification: analytic gradients of the full
composite loss (through the model, with the assignment frozen) against
central finite differences, parameter by parameter.

Uses a reduced 16 px configuration so the sweep over every parameter
stays fast. The relative error denominator is floored at 1e-3 so
parameters with near-zero gradients measure finite-difference roundoff
against an absolute scale instead of dividing by noise.
"""

from __future__ import annotations

import numpy as np

from . import autograd as ag
from .assignment import CostWeights
from .losses import LossWeights, batch_loss_graph
from .model import Detector, ModelConfig
from .rng import substream
from .synthdata import stage_to_target
from .train import match_layers

REDUCED_CONFIG = ModelConfig(
    image_size=16, patch=4, embed_dim=8, heads=2,
    num_queries=3, decoder_layers=2, mlp_ratio=2)

TOLERANCE = 1e-5
_REL_STEP = 1e-5
_DENOM_FLOOR = 1e-3
_N_IMAGES = 2


def _random_inputs(seed: int, cfg: ModelConfig):
    """Random images plus 2-3 ground truths per image."""
    rng = substream(seed, 7)
    s = cfg.image_size
    images = np.array(rng.uniforms(_N_IMAGES * s * s * 3)).reshape(_N_IMAGES, s, s, 3)
    gt_boxes, gt_targets = [], []
    for _ in range(_N_IMAGES):
        n = rng.randint(2, 3)
        boxes = []
        targets = []
        for _ in range(n):
            boxes.append([rng.uniform_in(0.25, 0.75), rng.uniform_in(0.25, 0.75),
                          rng.uniform_in(0.2, 0.5), rng.uniform_in(0.2, 0.5)])
            targets.append(stage_to_target(rng.randint(0, 2)))
        gt_boxes.append(np.array(boxes))
        gt_targets.append(np.array(targets))
    return images, gt_boxes, gt_targets


def run_gradcheck(seed: int, cfg: ModelConfig = REDUCED_CONFIG,
                  lw: LossWeights | None = None) -> tuple[float, str]:
    """(max relative error, worst parameter name) for one seed."""
    lw = lw or LossWeights()
    detector = Detector.init(cfg, seed)
    images, gt_boxes, gt_targets = _random_inputs(seed, cfg)

    layers = detector.forward(images)
    matches = match_layers(layers, gt_boxes, gt_targets, CostWeights())
    total, _, quality = batch_loss_graph(layers, gt_boxes, gt_targets, matches, lw)
    ag.backward(total)
    analytic = {name: p.grad.copy()
                for name, p in zip(detector.parameter_names(), detector.parameters())}

    # The assignment and the VFL quality targets are part of the frozen
    # context: the probe must differentiate the same function the graph did.
    def loss_at() -> float:
        with ag.no_grad():
            lys = detector.forward(images)
            t, _, _ = batch_loss_graph(lys, gt_boxes, gt_targets, matches, lw,
                                       fixed_vfl_quality=quality)
        return t.item()

    worst_err = 0.0
    worst_name = ""
    for name, p in zip(detector.parameter_names(), detector.parameters()):
        flat = p.data.reshape(-1)
        grad  = analytic[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            h = _REL_STEP * max(1.0, abs(orig))
            flat[i] = orig + h
            up = loss_at()
            flat[i] = orig - h
            down = loss_at()
            flat[i] = orig
            fd = (up - down) / (2.0 * h)
            err = abs(fd - grad[i]) / max(abs(fd), abs(grad[i]), _DENOM_FLOOR)
            if err > worst_err:
                worst_err = err
                worst_name = name
    return worst_err, worst_name
