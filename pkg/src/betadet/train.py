"""Training loop: seeded shuffling, per-layer Hungarian matching, the
composite loss, and clipped Adam steps. Fully deterministic for a given
config and dataset."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .assignment import MatchResult, cost_matrix_arrays, hungarian
from .config import RunConfig
from .losses import batch_loss_graph
from .model import Detector, LayerOutput
from .rng import substream
from .synthdata import Scene

# Substream key of the batch-shuffling stream; far above any key the
# scene generator can consume.
SHUFFLE_STREAM_KEY = 1 << 40

LOSS_LOG_HEADER = "step,total,vfl,bbox,giou,maturity"


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; carries the 1-based step number."""

    def __init__(self, step: int, cause: Exception):
        super().__init__(f"training diverged at step {step}: {cause}")
        self.step = step


@dataclass
class TrainResult:
    detector: Detector
    loss_rows: list[tuple[int, float, float, float, float, float]]


def scene_arrays(scenes: list[Scene]):
    """Images plus per-scene ground-truth arrays."""
    images = np.stack([s.image for s in scenes])
    gt_boxes = [
        np.array([[o.box.cx, o.box.cy, o.box.w, o.box.h] for o in s.objects])
        for s in scenes
    ]
    gt_targets = [np.array([o.y_target for o in s.objects]) for s in scenes]
    return images, gt_boxes, gt_targets


def match_layers(layers: list[LayerOutput], gt_boxes, gt_targets,
                 cost_weights) -> list[list[MatchResult]]:
    """Independent Hungarian assignment per layer per image."""
    matches = []
    for layer in layers:
        batch = layer.p_obj.shape[0]
        per_image = []
        for b in range(batch):
            cost = cost_matrix_arrays(
                layer.p_obj.data[b], layer.boxes.data[b],
                layer.alpha.data[b], layer.beta.data[b],
                gt_boxes[b], gt_targets[b], cost_weights)
            per_image.append(hungarian(cost))
        matches.append(per_image)
    return matches


def train(run_cfg: RunConfig, scenes: list[Scene],
          detector: Detector | None = None) -> TrainResult:
    """Run the configured number of steps over the scenes.

    Each epoch shuffles the scene order with the seeded stream and walks
    it in full batches (a trailing partial batch is dropped). Raises
    TrainingDiverged if any op yields NaN/Inf.
    """
    if len(scenes) < run_cfg.batch_size:
        raise ValueError(
            f"need at least batch_size={run_cfg.batch_size} scenes, got {len(scenes)}")
    if detector is None:
        detector = Detector.init(run_cfg.model_config(), run_cfg.seed)
    cost_w = run_cfg.cost_weights()
    loss_w = run_cfg.loss_weights()
    params = detector.parameters()
    adam = ag.AdamState(params)
    shuffle_rng = substream(run_cfg.seed, SHUFFLE_STREAM_KEY)

    order = list(range(len(scenes)))
    batches_per_epoch = len(scenes) // run_cfg.batch_size
    rows = []
    step = 0
    while step < run_cfg.steps:
        shuffle_rng.shuffle(order)
        for k in range(batches_per_epoch):
            if step >= run_cfg.steps:
                break
            step += 1
            picks = order[k * run_cfg.batch_size:(k + 1) * run_cfg.batch_size]
            images, gt_boxes, gt_targets = scene_arrays([scenes[i] for i in picks])
            try:
                layers = detector.forward(images)
                matches = match_layers(layers, gt_boxes, gt_targets, cost_w)
                total, breakdown, _ = batch_loss_graph(
                    layers, gt_boxes, gt_targets, matches, loss_w)
                ag.backward(total)
            except ag.NumericError as e:
                raise TrainingDiverged(step, e) from e
            ag.adam_step(params, adam, run_cfg.lr)
            rows.append((step, breakdown.total, breakdown.vfl,
                         breakdown.bbox_l1, breakdown.giou, breakdown.maturity))
    return TrainResult(detector=detector, loss_rows=rows)


def loss_log_csv(rows) -> str:
    lines = [LOSS_LOG_HEADER]
    for step, total, vfl, bbox, giou, maturity in rows:
        lines.append(
            f"{step},{total:.9g},{vfl:.9g},{bbox:.9g},{giou:.9g},{maturity:.9g}")
    return "\n".join(lines) + "\n"
